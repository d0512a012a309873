//! Scheme execution: each runner returns CSV columns, a summary and tolerance checks.

use num_complex::Complex64 as C64;
use serde_json::{json, Map, Value};
use toa_core::copenhagen::{no_reduction_density_tau, reduction_chain, snapshots, strip_detector_density, tau_sensitivity, zeno_survival};
use toa_core::histories::{
    coarse_grained_consistency, condition_decoherence, decoherence_density, fitted_arrival_width, zeno_robustness_2x2,
    HistoryProposition, RestrictedMethod, ZenoToyModel,
};
use toa_core::numerics::{integrate, GaussianSpec, Grid1D, Hamiltonian, TimeGrid, WavePacket};
use toa_core::povm::{
    kijowski_density, povm_from_samples, smeared_density_from_histories, MomentumSamples, PovmRegime, SmearingFamily,
    SmearingKind,
};
use toa_core::stochastic::{
    first_passage_density, l1_error, monte_carlo_first_passage, two_level_transition_density, wiener_arrival_cdf,
    wiener_first_passage_density, wiener_survival, ClassicalDensity, StochasticGenerator,
};
use toa_core::{ToaDistribution, ToaError};

use crate::config::{self, MethodName, RegimeName, Scenario, Scheme, SmearingName, StateSpec, StochasticSpec};

/// `value <relation> limit`.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub below: bool,
}

impl Check {
    fn below(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            value,
            limit,
            below: true,
        }
    }

    fn above(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            value,
            limit,
            below: false,
        }
    }

    pub fn pass(&self) -> bool {
        if self.below {
            self.value < self.limit
        } else {
            self.value > self.limit
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "value": num(self.value),
            "limit": self.limit,
            "relation": if self.below { "<" } else { ">" },
            "pass": self.pass(),
        })
    }
}

pub struct RunOutput {
    /// First column is `t`.
    pub columns: Vec<(&'static str, Vec<f64>)>,
    pub summary: Map<String, Value>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl RunOutput {
    fn new(times: &TimeGrid) -> Self {
        Self {
            columns: vec![("t", times.ts())],
            summary: Map::new(),
            checks: vec![],
            warnings: vec![],
        }
    }

    fn col(&mut self, name: &'static str, v: Vec<f64>) {
        self.columns.push((name, v));
    }

    fn put(&mut self, key: &str, v: Value) {
        self.summary.insert(key.into(), v);
    }

    fn distribution(&mut self, d: &ToaDistribution, t_cl: Option<f64>) {
        self.put("detected", num(d.detected()));
        self.put("p_N", num(d.no_detect));
        self.put("mass_defect", num(d.mass_defect()));
        self.put("min_density", num(d.min_density()));
        let peak = d.peak_time();
        self.put("peak_time", num(peak));
        if let Some(tc) = t_cl {
            self.put("t_cl", num(tc));
            self.put("peak_rel_offset", num((peak - tc).abs() / tc));
        }
    }
}

/// JSON number, or `null` when not finite.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn gaussian(s: &Scenario) -> GaussianSpec {
    s.state.expect("validated").components()[0]
}

fn grid(s: &Scenario) -> Result<Grid1D, ToaError> {
    let g = config::grid_spec(s).expect("validated");
    Grid1D::symmetric(g.half_width, g.n_points)
}

fn packet(s: &Scenario) -> Result<WavePacket, ToaError> {
    gaussian(s).left_supported(grid(s)?, s.mass)
}

fn peak(times: &[f64], v: &[f64]) -> f64 {
    let i = v
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc })
        .0;
    times[i]
}

pub fn run(s: &Scenario) -> Result<RunOutput, ToaError> {
    let times = TimeGrid::new(s.time.t_max, s.time.n_steps)?;
    let mut out = RunOutput::new(&times);
    match s.scheme {
        Scheme::Stochastic => stochastic(s, &times, &mut out)?,
        Scheme::CopenhagenTau | Scheme::CopenhagenStrip => copenhagen(s, &times, &mut out)?,
        Scheme::Histories => histories(s, &times, &mut out)?,
        Scheme::PovmFull | Scheme::PovmRegime | Scheme::Kijowski | Scheme::Compare => povm(s, &times, &mut out)?,
        Scheme::Zeno => zeno(s, &times, &mut out)?,
        Scheme::Zeno2x2 => zeno2x2(s, &times, &mut out)?,
    }
    Ok(out)
}

fn stochastic(s: &Scenario, times: &TimeGrid, out: &mut RunOutput) -> Result<(), ToaError> {
    let (t_max, n) = (times.t_max(), times.n_steps());
    match s.stochastic.expect("validated") {
        StochasticSpec::Diffusion {
            d,
            l_dist,
            n_walkers,
            mc_time_steps,
        } => {
            let gen = StochasticGenerator::Diffusion { d };
            let rho0 = ClassicalDensity::point_mass(grid(s)?, -l_dist)?;
            let dist = first_passage_density(&gen, &rho0, t_max, n)?;
            let exact = |t: f64| wiener_first_passage_density(d, l_dist, t);
            let analytic: Vec<f64> = times.ts().iter().map(|&t| exact(t)).collect();
            out.distribution(&dist, None);
            let l1 = l1_error(&dist, exact);
            let pn = wiener_survival(d, l_dist, t_max);
            out.put("p_N_analytic", num(pn));
            out.put("l1_error", num(l1));
            out.checks.push(Check::below("l1_error", l1, 1e-2));
            out.checks.push(Check::below("p_N_error", (dist.no_detect - pn).abs(), 1e-3));
            out.col("p", dist.density.clone());
            out.col("p_analytic", analytic);
            if n_walkers > 0 {
                let mc = monte_carlo_first_passage(&gen, &rho0, t_max, n_walkers, s.seed, mc_time_steps, n)?;
                let ks = mc.ks_distance(|t| wiener_arrival_cdf(d, l_dist, t));
                out.put(
                    "monte_carlo",
                    json!({
                        "n_walkers": n_walkers,
                        "streams": mc.n_streams,
                        "p_N": num(mc.no_detect),
                        "p_N_stderr": num(mc.no_detect_stderr),
                        "ks_distance": num(ks),
                    }),
                );
                out.checks.push(Check::below("ks_distance", ks, 0.02));
                out.col("p_mc", mc.histogram.density.clone());
            }
        }
        StochasticSpec::TwoLevel { rate_b, .. } => {
            let dist = two_level_transition_density(rate_b, t_max, n)?;
            let analytic: Vec<f64> = times.ts().iter().map(|&t| rate_b * (-rate_b * t).exp()).collect();
            out.distribution(&dist, None);
            let mean = dist.mean_arrival_time()?;
            out.put("conditional_mean", num(mean));
            out.put("inverse_rate", num(1.0 / rate_b));
            out.checks.push(Check::below("conditional_mean_rel_error", (mean * rate_b - 1.0).abs(), 0.01));
            out.col("p", dist.density.clone());
            out.col("p_analytic", analytic);
        }
    }
    Ok(())
}

fn copenhagen(s: &Scenario, times: &TimeGrid, out: &mut RunOutput) -> Result<(), ToaError> {
    let psi = packet(s)?;
    let h = Hamiltonian::Free;
    let (t_max, n) = (times.t_max(), times.n_steps());
    let t_cl = gaussian(s).t_cl(s.mass);
    let det = s.detector.expect("validated");
    let dist = if s.scheme == Scheme::CopenhagenTau {
        let tau = det.tau.expect("validated");
        let d = no_reduction_density_tau(&psi, &h, tau, t_max, n)?;
        let d2 = no_reduction_density_tau(&psi, &h, 2.0 * tau, t_max, n)?;
        out.put("tau_sensitivity", num(tau_sensitivity(&psi, &h, tau, t_max, n)?));
        out.col("p", d.density.clone());
        out.col("p_2tau", d2.density);
        d
    } else {
        let v = det.v.expect("validated");
        let d = strip_detector_density(&psi, &h, v, t_max, n)?;
        let snap = snapshots(&psi, &h, t_max, n)?;
        out.col("p", d.density.clone());
        out.col("rho_at_zero", snap.density_at_zero);
        d
    };
    out.distribution(&dist, Some(t_cl));
    out.checks.push(Check::below("mass_defect", dist.mass_defect(), 1e-6));
    Ok(())
}

fn histories(s: &Scenario, times: &TimeGrid, out: &mut RunOutput) -> Result<(), ToaError> {
    let psi = packet(s)?;
    let g = gaussian(s);
    let spec = s.histories.unwrap_or_default();
    let method = match (spec.method, config::method_dt(&spec)) {
        (MethodName::Images, _) => RestrictedMethod::Images,
        (MethodName::TrotterProjection, Some(dt)) => RestrictedMethod::TrotterProjection { dt },
        (MethodName::DirichletPde, Some(dt)) => RestrictedMethod::DirichletPde { dt },
        _ => unreachable!("validated"),
    };
    let (t_max, n) = (times.t_max(), times.n_steps());
    let d = decoherence_density(&psi, &Hamiltonian::Free, t_max, n, method)?;
    out.warnings.extend(d.warnings.iter().cloned());
    let tau = s.detector.and_then(|x| x.tau).expect("validated");
    let kind = match spec.smearing {
        SmearingName::Gaussian => SmearingKind::Gaussian,
        SmearingName::FourierSum => SmearingKind::FourierSum,
    };
    let family = SmearingFamily::new(tau, t_max, kind)?;
    let ts = times.ts();
    let p: Vec<f64> = ts
        .iter()
        .map(|&t| smeared_density_from_histories(&d, &family, t))
        .collect::<Result<_, _>>()?;
    let dc = condition_decoherence(&d)?;
    let defect: Vec<f64> = (0..ts.len())
        .map(|i| {
            if i == 0 || i == n {
                return Ok(0.0);
            }
            let a = HistoryProposition::window("before", 0.0, ts[i]);
            let b = HistoryProposition::window("after", ts[i], t_max);
            coarse_grained_consistency(&dc, &a, &b).map(|r| r.defect)
        })
        .collect::<Result<_, ToaError>>()?;
    let identity = d.identity_defect()?;
    let delta = g.arrival_width(s.mass);
    let t_cl = g.t_cl(s.mass);
    out.put("method", json!(method.name()));
    out.put("identity_defect", num(identity));
    out.put("normalization_defect", num(d.normalization_defect()?));
    out.put("arrival_mass", num(d.arrival_mass()));
    out.put("d_NN", num(d.dnn));
    out.put("hermiticity_defect", num(d.hermiticity_defect()));
    out.put("smeared_detected", num(integrate(&p, times.dt())));
    out.put("diag_singularity_note", json!(d.diag_singularity_note));
    out.put("t_cl", num(t_cl));
    out.put("classical_width", num(delta));
    match fitted_arrival_width(&d, delta) {
        Ok(w) => out.put("fitted_width", num(w)),
        Err(e) => out.warnings.push(format!("width fit: {e}")),
    }
    let (lo, hi) = ((t_cl - 3.0 * delta).max(0.0), (t_cl + 3.0 * delta).min(t_max));
    let alpha = HistoryProposition::window("classical", lo, hi);
    if lo > 0.0 || hi < t_max {
        let rest = alpha.complement("rest", t_max);
        let r = coarse_grained_consistency(&dc, &alpha, &rest)?;
        out.put(
            "classical_window",
            json!({
                "window": [lo, hi],
                "d_c_alpha_alpha": num(r.diag_alpha),
                "cross_abs": num(r.cross.norm()),
                "defect": num(r.defect),
            }),
        );
    }
    out.checks.push(Check::below("identity_defect_abs", identity.abs(), 1e-2));
    out.col("p", p);
    out.col("re_d_t_N", d.no_detect_column.iter().map(|c: &C64| c.re).collect());
    out.col("boundary_amp_sq", d.boundary_amplitudes.iter().map(|c| c.norm_sqr()).collect());
    out.col("consistency_defect", defect);
    Ok(())
}

fn povm_regime(r: RegimeName) -> PovmRegime {
    match r {
        RegimeName::Full => PovmRegime::Full,
        RegimeName::Smeared => PovmRegime::Smeared,
        RegimeName::LargeEtau => PovmRegime::LargeEtau,
    }
}

fn povm(s: &Scenario, times: &TimeGrid, out: &mut RunOutput) -> Result<(), ToaError> {
    let st = s.state.expect("validated");
    let n_p = s.povm.unwrap_or_default().n_p;
    let comps = st.components();
    let samples = match st {
        StateSpec::Gaussian { .. } => MomentumSamples::gaussian(&comps[0], s.mass, n_p)?,
        StateSpec::TwoGaussian { .. } => {
            let one = C64::new(1.0, 0.0);
            MomentumSamples::gaussian_superposition(&[(one, comps[0]), (one, comps[1])], s.mass, n_p)?
        }
    };
    let ts = times.ts();
    let t_cl: Vec<f64> = comps.iter().map(|g| g.t_cl(s.mass)).collect();
    out.put("t_cl", json!(t_cl.iter().map(|&t| num(t)).collect::<Vec<_>>()));
    out.put("momentum_samples", json!(samples.len()));
    let peak_offset = |p: f64| (p - t_cl[0]).abs() / t_cl[0];

    let kij = if s.scheme == Scheme::PovmFull || s.scheme == Scheme::PovmRegime {
        None
    } else {
        Some(kijowski_density(&samples, &ts))
    };
    let pov = if s.scheme == Scheme::Kijowski {
        None
    } else {
        let tau = s.detector.and_then(|d| d.tau).expect("validated");
        let regime = povm_regime(config::regime(s));
        let r = povm_from_samples(&samples, tau, times.t_max(), times.n_steps(), regime)?;
        out.warnings.extend(r.warnings.iter().cloned());
        out.put("regime", json!(regime.name()));
        out.put("tau", num(tau));
        out.put("min_etau", num(r.min_etau));
        out.put("kernel_rank", json!(r.rank));
        out.put("detected", num(r.detected()));
        out.put("p_N", num(r.no_detect));
        let min = r.density.iter().copied().fold(f64::INFINITY, f64::min);
        out.put("min_density", num(min));
        out.checks.push(Check::above("min_density", min, -1e-10));
        Some(r.density)
    };

    match (pov, kij) {
        (Some(p), None) => {
            let pk = peak(&ts, &p);
            out.put("peak_time", num(pk));
            out.col("p", p);
        }
        (None, Some(k)) => {
            let pk = peak(&ts, &k);
            out.put("detected", num(integrate(&k, times.dt())));
            out.put("peak_time", num(pk));
            if comps.len() == 1 {
                out.put("peak_rel_offset", num(peak_offset(pk)));
                out.checks.push(Check::below("peak_rel_offset", peak_offset(pk), 0.01));
            }
            out.col("p", k);
        }
        (Some(p), Some(k)) => {
            let kmax = k.iter().copied().fold(0.0, f64::max);
            let rel: Vec<f64> = p.iter().zip(&k).map(|(a, b)| (a - b).abs() / kmax).collect();
            let sup = rel.iter().copied().fold(0.0, f64::max);
            out.put("kijowski_detected", num(integrate(&k, times.dt())));
            out.put("peak_time", num(peak(&ts, &p)));
            out.put("kijowski_peak_time", num(peak(&ts, &k)));
            out.put("sup_rel_deviation", num(sup));
            out.checks.push(Check::below("sup_rel_deviation", sup, 0.02));
            out.col("p", p);
            out.col("p_kijowski", k);
            out.col("rel_deviation", rel);
        }
        (None, None) => unreachable!(),
    }
    Ok(())
}

fn zeno(s: &Scenario, times: &TimeGrid, out: &mut RunOutput) -> Result<(), ToaError> {
    let psi = packet(s)?;
    let h = Hamiltonian::Free;
    let (t_max, n) = (times.t_max(), times.n_steps());
    let chain = reduction_chain(&psi, &h, n, t_max)?;
    let mut p = vec![0.0];
    p.extend(&chain);
    let mut surv = Vec::with_capacity(n + 1);
    let mut acc = 1.0;
    surv.push(acc);
    for c in &chain {
        acc -= c;
        surv.push(acc);
    }
    let ns = s.zeno.clone().unwrap_or_default().n_values;
    let sweep: Vec<f64> = ns
        .iter()
        .map(|&k| zeno_survival(&psi, &h, t_max, k))
        .collect::<Result<_, _>>()?;
    let monotone = sweep.windows(2).zip(ns.windows(2)).all(|(v, k)| (v[1] - v[0]) * (k[1] as f64 - k[0] as f64) >= 0.0);
    out.put("survival_final", num(acc));
    out.put(
        "survival_sweep",
        Value::Array(ns.iter().zip(&sweep).map(|(&k, &v)| json!({"n": k, "survival": num(v)})).collect()),
    );
    out.put("sweep_monotone", json!(monotone));
    out.col("p", p);
    out.col("survival", surv);
    Ok(())
}

fn zeno2x2(s: &Scenario, times: &TimeGrid, out: &mut RunOutput) -> Result<(), ToaError> {
    let z = s.zeno2x2.expect("validated");
    let model = ZenoToyModel {
        epsilon: z.epsilon,
        x_rate: z.x_start,
        y_rate: z.y,
    };
    let reports: Vec<_> = times
        .ts()
        .iter()
        .map(|&t| zeno_robustness_2x2(&model, t))
        .collect::<Result<_, _>>()?;
    let dev: Vec<f64> = reports.iter().map(|r| r.deviation).collect();
    let worst = dev.iter().copied().fold(0.0, f64::max);
    out.put("max_deviation", num(worst));
    out.put("x_final_max", num(reports.iter().map(|r| r.x_final).filter(|x| x.is_finite()).fold(0.0, f64::max)));
    out.checks.push(Check::below("max_deviation", worst, 1e-8));
    out.col("p", reports.iter().map(|r| r.k[(1, 1)].re).collect());
    out.col("deviation", dev);
    Ok(())
}
