//! Scenario schema, parsing and precondition checks.

use serde::{Deserialize, Serialize};
use toa_core::numerics::special::erfc;
use toa_core::numerics::GaussianSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Stochastic,
    CopenhagenTau,
    CopenhagenStrip,
    Histories,
    PovmFull,
    PovmRegime,
    Kijowski,
    Compare,
    Zeno,
    Zeno2x2,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Stochastic => "stochastic",
            Self::CopenhagenTau => "copenhagen_tau",
            Self::CopenhagenStrip => "copenhagen_strip",
            Self::Histories => "histories",
            Self::PovmFull => "povm_full",
            Self::PovmRegime => "povm_regime",
            Self::Kijowski => "kijowski",
            Self::Compare => "compare",
            Self::Zeno => "zeno",
            Self::Zeno2x2 => "zeno2x2",
        }
    }

    fn uses(self, section: Section) -> bool {
        use Section::*;
        use Scheme::*;
        match section {
            State => !matches!(self, Stochastic | Zeno2x2),
            Grid => matches!(self, Stochastic | CopenhagenTau | CopenhagenStrip | Histories | Zeno),
            Detector => matches!(self, CopenhagenTau | CopenhagenStrip | Histories | PovmFull | PovmRegime | Compare),
            Stoch => self == Stochastic,
            Hist => self == Histories,
            Povm => matches!(self, PovmFull | PovmRegime | Kijowski | Compare),
            ZenoS => self == Zeno,
            Zeno2 => self == Zeno2x2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    State,
    Grid,
    Detector,
    Stoch,
    Hist,
    Povm,
    ZenoS,
    Zeno2,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub scheme: Scheme,
    #[serde(default = "one")]
    pub mass: f64,
    pub time: TimeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<DetectorSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stochastic: Option<StochasticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histories: Option<HistoriesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub povm: Option<PovmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeno: Option<ZenoSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeno2x2: Option<Zeno2x2Spec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

/// Time grid `t_i = i T/n_steps`, `i = 0..=n_steps`; CSV files have `n_steps + 1` rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_max: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// Exactly one of `sigma0` (position width) and `a` (momentum-form width).
    Gaussian {
        l_dist: f64,
        mean_momentum: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma0: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
    },
    /// Equal-weight superposition of two Gaussians sharing `a` and `l_dist`.
    TwoGaussian { l_dist: f64, a: f64, p1: f64, p2: f64 },
}

impl StateSpec {
    pub fn l_dist(&self) -> f64 {
        match *self {
            Self::Gaussian { l_dist, .. } | Self::TwoGaussian { l_dist, .. } => l_dist,
        }
    }

    pub fn components(&self) -> Vec<GaussianSpec> {
        match *self {
            Self::Gaussian {
                l_dist,
                mean_momentum,
                sigma0,
                a,
            } => match (sigma0, a) {
                (Some(s), _) => vec![GaussianSpec::with_sigma0(l_dist, mean_momentum, s)],
                (None, Some(a)) => vec![GaussianSpec::with_a(l_dist, mean_momentum, a)],
                (None, None) => vec![],
            },
            Self::TwoGaussian { l_dist, a, p1, p2 } => {
                vec![GaussianSpec::with_a(l_dist, p1, a), GaussianSpec::with_a(l_dist, p2, a)]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_x: Option<f64>,
}

fn default_mc_steps() -> usize {
    20_000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum StochasticSpec {
    Diffusion {
        d: f64,
        l_dist: f64,
        /// Monte Carlo walkers; 0 skips the Monte Carlo oracle.
        #[serde(default)]
        n_walkers: usize,
        #[serde(default = "default_mc_steps")]
        mc_time_steps: usize,
    },
    TwoLevel {
        #[serde(default)]
        rate_a: f64,
        rate_b: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    Images,
    TrotterProjection,
    DirichletPde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmearingName {
    #[default]
    Gaussian,
    FourierSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoriesSpec {
    #[serde(default)]
    pub method: MethodName,
    /// Step of the Trotter or PDE propagator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub smearing: SmearingName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeName {
    Full,
    Smeared,
    LargeEtau,
}

fn default_n_p() -> usize {
    512
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeName>,
    /// Momentum samples over `p̄ ± 8/a`.
    #[serde(default = "default_n_p")]
    pub n_p: usize,
}

impl Default for PovmSpec {
    fn default() -> Self {
        Self {
            regime: None,
            n_p: default_n_p(),
        }
    }
}

fn default_n_values() -> Vec<usize> {
    vec![64, 128, 256, 512, 1024]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZenoSpec {
    /// Measurement counts for the survival sweep.
    #[serde(default = "default_n_values")]
    pub n_values: Vec<usize>,
}

impl Default for ZenoSpec {
    fn default() -> Self {
        Self {
            n_values: default_n_values(),
        }
    }
}

fn default_x_start() -> f64 {
    1e3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zeno2x2Spec {
    pub epsilon: f64,
    pub y: f64,
    #[serde(default = "default_x_start")]
    pub x_start: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub stem: String,
}

/// A parse failure with its source position.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

/// Parses a scenario and returns it together with the raw JSON value.
pub fn parse(text: &str) -> Result<(Scenario, serde_json::Value), ParseError> {
    let err = |e: serde_json::Error| ParseError {
        line: e.line(),
        column: e.column(),
        message: e.to_string().split(" at line").next().unwrap_or_default().to_string(),
    };
    let scenario: Scenario = serde_json::from_str(text).map_err(err)?;
    let raw: serde_json::Value = serde_json::from_str(text).map_err(err)?;
    Ok((scenario, raw))
}

/// One violated precondition. Warnings flag regime conditions and do not block a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub field: String,
    pub message: String,
    pub warning: bool,
}

impl std::fmt::Display for Issue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.warning {
            write!(f, "warning: ")?;
        }
        write!(f, "{}: {}", self.field, self.message)
    }
}

struct Issues(Vec<Issue>);

impl Issues {
    fn check(&mut self, ok: bool, field: &str, message: impl Into<String>) {
        if !ok {
            self.0.push(Issue {
                field: field.into(),
                message: message.into(),
                warning: false,
            });
        }
    }

    fn warn(&mut self, ok: bool, field: &str, message: impl Into<String>) {
        if !ok {
            self.0.push(Issue {
                field: field.into(),
                message: message.into(),
                warning: true,
            });
        }
    }

    fn positive(&mut self, v: f64, field: &str) {
        self.check(v > 0.0 && v.is_finite(), field, format!("must be positive and finite, got {v}"));
    }
}

/// Grid used by a scheme: explicit, or `[-8L, 8L]` with 4096 points.
pub fn grid_spec(s: &Scenario) -> Option<GridSpec> {
    if let Some(g) = s.grid {
        return Some(g);
    }
    match (s.scheme, &s.state, &s.stochastic) {
        (Scheme::Stochastic, _, Some(StochasticSpec::Diffusion { d, l_dist, .. })) => {
            // Room for the spreading density: L + 8√(DT), at least 8L.
            let hw = (8.0 * l_dist).max(l_dist + 8.0 * (d * s.time.t_max).sqrt());
            Some(GridSpec {
                half_width: hw.ceil(),
                n_points: 4096,
            })
        }
        (Scheme::Stochastic, _, _) => None,
        (_, Some(st), _) => Some(GridSpec {
            half_width: 8.0 * st.l_dist(),
            n_points: 4096,
        }),
        _ => None,
    }
}

/// Defaults the propagator step of the Trotter and PDE methods.
pub fn method_dt(h: &HistoriesSpec) -> Option<f64> {
    match h.method {
        MethodName::Images => None,
        MethodName::TrotterProjection => Some(h.dt.unwrap_or(1e-4)),
        MethodName::DirichletPde => Some(h.dt.unwrap_or(5e-4)),
    }
}

/// Regime used by the POVM schemes.
pub fn regime(s: &Scenario) -> RegimeName {
    match s.scheme {
        Scheme::PovmFull => RegimeName::Full,
        _ => s.povm.and_then(|p| p.regime).unwrap_or(RegimeName::LargeEtau),
    }
}

/// Every violated precondition; empty when the scenario can run.
pub fn validate(s: &Scenario) -> Vec<Issue> {
    let mut is = Issues(vec![]);
    let sc = s.scheme;
    is.positive(s.mass, "mass");
    is.positive(s.time.t_max, "time.t_max");
    is.check(s.time.n_steps >= 2, "time.n_steps", "must be >= 2");
    is.check(s.time.n_steps <= 1_000_000, "time.n_steps", "must be <= 1e6");
    let t_max = s.time.t_max;
    let dt = t_max / s.time.n_steps.max(1) as f64;

    let sections = [
        (Section::State, s.state.is_some(), "state"),
        (Section::Grid, s.grid.is_some(), "grid"),
        (Section::Detector, s.detector.is_some(), "detector"),
        (Section::Stoch, s.stochastic.is_some(), "stochastic"),
        (Section::Hist, s.histories.is_some(), "histories"),
        (Section::Povm, s.povm.is_some(), "povm"),
        (Section::ZenoS, s.zeno.is_some(), "zeno"),
        (Section::Zeno2, s.zeno2x2.is_some(), "zeno2x2"),
    ];
    for (sec, present, name) in sections {
        is.check(!present || sc.uses(sec), name, format!("not used by scheme {}", sc.name()));
    }

    if let Some(g) = s.grid {
        is.positive(g.half_width, "grid.half_width");
        is.check(
            g.n_points >= 16 && g.n_points.is_power_of_two(),
            "grid.n_points",
            format!("must be a power of two >= 16, got {}", g.n_points),
        );
    }
    let dx = grid_spec(s).map(|g| 2.0 * g.half_width / g.n_points as f64);

    if sc.uses(Section::State) {
        match &s.state {
            None => is.check(false, "state", format!("required by scheme {}", sc.name())),
            Some(st) => check_state(&mut is, s, st),
        }
    }

    let det = s.detector.unwrap_or_default();
    let need = |is: &mut Issues, v: Option<f64>, field: &str| -> Option<f64> {
        match v {
            None => {
                is.check(false, field, format!("required by scheme {}", sc.name()));
                None
            }
            Some(x) => {
                is.positive(x, field);
                Some(x)
            }
        }
    };
    match sc {
        Scheme::CopenhagenTau | Scheme::Histories => {
            if let Some(tau) = need(&mut is, det.tau, "detector.tau") {
                is.check(tau < t_max, "detector.tau", "must be below time.t_max");
                if sc == Scheme::CopenhagenTau {
                    is.check(tau >= 5.0 * dt, "detector.tau", format!("must be >= 5 dt = {}", 5.0 * dt));
                }
            }
        }
        Scheme::CopenhagenStrip => {
            need(&mut is, det.v, "detector.v");
        }
        Scheme::PovmFull | Scheme::PovmRegime | Scheme::Compare => {
            if let Some(tau) = need(&mut is, det.tau, "detector.tau") {
                is.check(tau < t_max / 20.0, "detector.tau", format!("must be below T/20 = {}", t_max / 20.0));
                if regime(s) == RegimeName::LargeEtau {
                    if let Some(st) = &s.state {
                        let bound = 5.0 * (2.0 * s.mass / tau).sqrt();
                        for g in st.components() {
                            is.warn(
                                g.mean_momentum >= bound,
                                "regime",
                                format!(
                                    "mean momentum {} is below 5 sqrt(2M/tau) = {bound:.4}; the large-etau form does not apply",
                                    g.mean_momentum
                                ),
                            );
                        }
                    }
                }
            }
        }
        _ => {}
    }
    if let (Some(dx), Some(d)) = (dx, det.delta_x) {
        is.check(d >= dx, "detector.delta_x", format!("must be >= dx = {dx}"));
    }

    if sc == Scheme::Stochastic {
        match &s.stochastic {
            None => is.check(false, "stochastic", "required by scheme stochastic"),
            Some(StochasticSpec::Diffusion {
                d,
                l_dist,
                n_walkers,
                mc_time_steps,
            }) => {
                is.positive(*d, "stochastic.d");
                is.positive(*l_dist, "stochastic.l_dist");
                is.check(
                    *n_walkers == 0 || *n_walkers >= 10_000,
                    "stochastic.n_walkers",
                    "must be 0 or >= 1e4",
                );
                is.check(*mc_time_steps >= 1, "stochastic.mc_time_steps", "must be >= 1");
                if let Some(g) = grid_spec(s) {
                    is.check(*l_dist < g.half_width, "stochastic.l_dist", "start point lies outside the grid");
                }
            }
            Some(StochasticSpec::TwoLevel { rate_a, rate_b }) => {
                is.check(*rate_a >= 0.0 && rate_a.is_finite(), "stochastic.rate_a", "must be >= 0");
                is.positive(*rate_b, "stochastic.rate_b");
            }
        }
    }

    if let Some(h) = s.histories {
        if let Some(d) = method_dt(&h) {
            is.positive(d, "histories.dt");
        }
        if h.method == MethodName::Images {
            is.check(h.dt.is_none(), "histories.dt", "not used by the images method");
        }
    }
    if let Some(p) = s.povm {
        is.check(p.n_p >= 16 && p.n_p <= 4096, "povm.n_p", "must lie in [16, 4096]");
        if sc == Scheme::PovmFull {
            is.check(
                matches!(p.regime, None | Some(RegimeName::Full)),
                "povm.regime",
                "povm_full always uses the full regime",
            );
        }
        if sc == Scheme::Kijowski {
            is.check(p.regime.is_none(), "povm.regime", "not used by scheme kijowski");
        }
    }
    if sc == Scheme::Zeno {
        let z = s.zeno.clone().unwrap_or_default();
        is.check(
            !z.n_values.is_empty() && z.n_values.iter().all(|&n| n >= 1),
            "zeno.n_values",
            "must be a non-empty list of counts >= 1",
        );
    }
    if sc == Scheme::Zeno2x2 {
        match s.zeno2x2 {
            None => is.check(false, "zeno2x2", "required by scheme zeno2x2"),
            Some(z) => {
                is.check(z.epsilon.is_finite(), "zeno2x2.epsilon", "must be finite");
                is.check(z.y >= 0.0 && z.y.is_finite(), "zeno2x2.y", "must be >= 0");
                is.check(z.x_start >= z.y && z.x_start.is_finite(), "zeno2x2.x_start", "must be >= y");
            }
        }
    }
    if let Some(o) = &s.output {
        is.check(!o.stem.is_empty(), "output.stem", "must not be empty");
    }
    is.0
}

fn check_state(is: &mut Issues, s: &Scenario, st: &StateSpec) {
    let sc = s.scheme;
    match *st {
        StateSpec::Gaussian {
            l_dist,
            mean_momentum,
            sigma0,
            a,
        } => {
            is.positive(l_dist, "state.l_dist");
            is.positive(mean_momentum, "state.mean_momentum");
            match (sigma0, a) {
                (Some(_), Some(_)) | (None, None) => is.check(false, "state", "give exactly one of sigma0 and a"),
                (Some(v), None) => is.positive(v, "state.sigma0"),
                (None, Some(v)) => is.positive(v, "state.a"),
            }
        }
        StateSpec::TwoGaussian { l_dist, a, p1, p2 } => {
            is.check(
                matches!(sc, Scheme::PovmFull | Scheme::PovmRegime | Scheme::Kijowski | Scheme::Compare),
                "state.kind",
                format!("two_gaussian is not supported by scheme {}", sc.name()),
            );
            is.positive(l_dist, "state.l_dist");
            is.positive(a, "state.a");
            is.positive(p1, "state.p1");
            is.positive(p2, "state.p2");
        }
    }
    let comps = st.components();
    if comps.iter().all(|g| g.validate().is_ok() && g.sigma0() > 0.0 && g.l_dist() > 0.0) {
        for g in &comps {
            let right = 0.5 * erfc(g.l_dist() / g.sigma0());
            is.check(
                right < 1e-6,
                "state",
                format!("mass {right:.3e} on x >= 0; the state must start left of the detector"),
            );
            if let Some(gs) = grid_spec(s) {
                let reach = g.l_dist() + 8.0 * g.sigma0();
                is.check(reach < gs.half_width, "grid.half_width", format!("must exceed L + 8 sigma0 = {reach}"));
            }
        }
    }
}
