//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line with the measured values,
//! then asserts. Criteria that the implementation cannot meet fail here on purpose.

mod common;

use std::io::Write;

use common::{argmax, random_state, reference, reference_packet, sup};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use toa_core::copenhagen::{
    no_reduction_density_tau, reduction_chain_probability, strip_detector_density, tau_sensitivity, zeno_survival,
};
use toa_core::histories::{
    coarse_grained_consistency, condition_decoherence, decoherence_density, fitted_arrival_width, zeno_robustness_2x2,
    HistoryProposition, RestrictedMethod, ZenoToyModel,
};
use toa_core::numerics::{default_grid, integrate, GaussianSpec, Grid1D, Hamiltonian, TimeGrid};
use toa_core::povm::{
    extended_density, kijowski_density, povm_from_samples, sequential_two_time_probability, toa_povm_density,
    two_gaussian_comparison, KernelR, MomentumSamples, PovmRegime,
};
use toa_core::stochastic::{
    first_passage_density, l1_error, monte_carlo_first_passage, two_level_transition_density, wiener_arrival_cdf,
    wiener_first_passage_density, wiener_survival, ClassicalDensity, StochasticGenerator,
};

struct Item {
    label: String,
    value: f64,
    ok: bool,
    rule: String,
}

fn below(label: impl Into<String>, value: f64, limit: f64) -> Item {
    Item {
        label: label.into(),
        value,
        ok: value < limit,
        rule: format!("< {limit:e}"),
    }
}

fn above(label: impl Into<String>, value: f64, limit: f64) -> Item {
    Item {
        label: label.into(),
        value,
        ok: value > limit,
        rule: format!("> {limit:e}"),
    }
}

fn within(label: impl Into<String>, value: f64, lo: f64, hi: f64) -> Item {
    Item {
        label: label.into(),
        value,
        ok: (lo..=hi).contains(&value),
        rule: format!("in [{lo}, {hi}]"),
    }
}

fn flag(label: impl Into<String>, ok: bool) -> Item {
    Item {
        label: label.into(),
        value: f64::from(u8::from(ok)),
        ok,
        rule: "holds".into(),
    }
}

fn report(id: u32, title: &str, items: &[Item]) {
    let ok = items.iter().all(|i| i.ok);
    let detail: Vec<String> = items
        .iter()
        .map(|i| format!("{}{} = {:.4e} ({})", if i.ok { "" } else { "!" }, i.label, i.value, i.rule))
        .collect();
    // Written to the raw handle so the line survives the test harness's output capture.
    let line = format!("{} criterion {id:>2} {title}: {}\n", if ok { "PASS" } else { "FAIL" }, detail.join("; "));
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(ok, "criterion {id} failed");
}

#[test]
fn criterion_01_wiener_first_passage() {
    let (d, l, t_max, n) = (1.0, 2.0, 50.0, 2000);
    let gen = StochasticGenerator::Diffusion { d };
    let rho0 = ClassicalDensity::point_mass(Grid1D::symmetric(59.0, 4096).unwrap(), -l).unwrap();
    let dist = first_passage_density(&gen, &rho0, t_max, n).unwrap();
    let l1 = l1_error(&dist, |t| wiener_first_passage_density(d, l, t));
    let pn = (dist.no_detect - wiener_survival(d, l, t_max)).abs();
    let mc = monte_carlo_first_passage(&gen, &rho0, t_max, 100_000, 7, 20_000, n).unwrap();
    let ks = mc.ks_distance(|t| wiener_arrival_cdf(d, l, t));
    report(
        1,
        "Wiener first passage",
        &[below("L1 error", l1, 1e-2), below("KS distance", ks, 0.02), below("|p_N - erf|", pn, 1e-3)],
    );
}

#[test]
fn criterion_02_two_level_decay() {
    let b = 0.5;
    let dist = two_level_transition_density(b, 40.0, 40_000).unwrap();
    let exact = sup(dist
        .times
        .ts()
        .iter()
        .zip(&dist.density)
        .map(|(t, p)| (p - b * (-b * t).exp()).abs()));
    let mean = dist.mean_arrival_time().unwrap();
    report(
        2,
        "two-level decay",
        &[below("sup |p - b e^-bt|", exact, 1e-12), below("mean rel error", (mean * b - 1.0).abs(), 0.01)],
    );
}

#[test]
fn criterion_03_reduction_chain_scaling() {
    let psi = reference_packet();
    let t_cl = reference().t_cl(1.0);
    let items: Vec<Item> = [128, 256]
        .iter()
        .map(|&n| {
            let p1 = reduction_chain_probability(&psi, &Hamiltonian::Free, n, n, t_cl).unwrap();
            let p2 = reduction_chain_probability(&psi, &Hamiltonian::Free, 2 * n, 2 * n, t_cl).unwrap();
            within(format!("p(2n)/p(n) at n = {n}"), p2 / p1, 0.2, 0.3)
        })
        .collect();
    report(3, "reduction chain ~ dt^2", &items);
}

#[test]
fn criterion_04_zeno_limit() {
    let psi = reference_packet();
    let t_max = 2.0 * reference().t_cl(1.0);
    let ns = [64, 128, 256, 512, 1024];
    let s: Vec<f64> = ns
        .iter()
        .map(|&n| zeno_survival(&psi, &Hamiltonian::Free, t_max, n).unwrap())
        .collect();
    println!("zeno survival {:?}", ns.iter().zip(&s).collect::<Vec<_>>());
    report(
        4,
        "Zeno limit",
        &[
            flag("monotone in n", s.windows(2).all(|w| w[1] >= w[0])),
            above("survival at n = 1024", s[4], 0.99),
        ],
    );
}

#[test]
fn criterion_05_appendix_non_robustness() {
    let mut worst: f64 = 0.0;
    for y in [0.0, 0.1, 1.0] {
        let m = ZenoToyModel {
            epsilon: 1.0,
            x_rate: 1e3,
            y_rate: y,
        };
        for t in [0.0, 1.0, 10.0] {
            worst = worst.max(zeno_robustness_2x2(&m, t).unwrap().deviation);
        }
    }
    report(5, "2x2 non-robustness", &[below("max |K - e^-yt E|", worst, 1e-8)]);
}

#[test]
fn criterion_06_no_reduction_densities() {
    let psi = reference_packet();
    let g = reference();
    let t_cl = g.t_cl(1.0);
    let (t_max, n) = (2.0, 2000);
    let tau = g.arrival_width(1.0) / 2.0;
    let h = Hamiltonian::Free;
    let a = no_reduction_density_tau(&psi, &h, tau, t_max, n).unwrap();
    let b = strip_detector_density(&psi, &h, 5.0, t_max, n).unwrap();
    let sens = tau_sensitivity(&psi, &h, tau, t_max, n).unwrap();
    report(
        6,
        "no-reduction densities",
        &[
            below("tau-form mass defect", a.mass_defect(), 1e-6),
            below("strip mass defect", b.mass_defect(), 1e-6),
            below("tau-form peak offset", (a.peak_time() - t_cl).abs() / t_cl, 0.02),
            below("strip peak offset", (b.peak_time() - t_cl).abs() / t_cl, 0.02),
            above("tau sensitivity", sens, 0.1),
        ],
    );
}

#[test]
fn criterion_07_histories_normalization() {
    let psi = reference_packet();
    let defects: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| {
            decoherence_density(&psi, &Hamiltonian::Free, 2.0, n, RestrictedMethod::Images)
                .unwrap()
                .identity_defect()
                .unwrap()
                .abs()
        })
        .collect();
    println!("identity defect at 100/200/400 bins {defects:?}");
    report(
        7,
        "histories normalization identity",
        &[
            below("|defect| at 400 bins", defects[2], 1e-2),
            flag("decreasing under refinement", defects.windows(2).all(|w| w[1] < w[0])),
        ],
    );
}

#[test]
fn criterion_08_classical_width() {
    let mut items = vec![];
    for p in [5.0, 10.0, 20.0] {
        let g = GaussianSpec::with_sigma0(10.0, p, 1.0);
        let psi = g.left_supported(default_grid(10.0).unwrap(), 1.0).unwrap();
        let t_cl = g.t_cl(1.0);
        let delta = g.arrival_width(1.0);
        let t_max = 2.0 * t_cl;
        let d = decoherence_density(&psi, &Hamiltonian::Free, t_max, 400, RestrictedMethod::Images).unwrap();
        let w = fitted_arrival_width(&d, delta).unwrap();
        items.push(below(format!("width rel error at s0p = {p}"), (w / delta - 1.0).abs(), 0.15));
        let dc = condition_decoherence(&d).unwrap();
        let alpha = HistoryProposition::window("classical", t_cl - 3.0 * delta, t_cl + 3.0 * delta);
        let rest = alpha.complement("rest", t_max);
        let r = coarse_grained_consistency(&dc, &alpha, &rest).unwrap();
        items.push(above(format!("d_c(a,a) at s0p = {p}"), r.diag_alpha, 0.99));
        items.push(below(format!("|d_c(a,a')| at s0p = {p}"), r.cross.norm(), 0.05));
    }
    report(8, "classical-limit width", &items);
}

#[test]
fn criterion_09_kernel() {
    let mut items = vec![];
    let r = KernelR::new(1.0, 1.0).unwrap();
    for et in [0.01, 1.0, 100.0] {
        items.push(below(format!("|quad - closed| at et = {et}"), (r.quadrature(et) - r.closed_form(et)).abs(), 1e-8));
    }

    let fig1 = GaussianSpec::with_a(10.0, 10.0, 1.0);
    let s = MomentumSamples::gaussian(&fig1, 1.0, 512).unwrap();
    let mass = |tau: f64| povm_from_samples(&s, tau, 2.0, 2000, PovmRegime::Full).unwrap().detected();
    let ratio = mass(1e-4) / mass(1e-5) / 10f64.sqrt();
    items.push(below("|m(1e-4)/m(1e-5)/sqrt(10) - 1|", (ratio - 1.0).abs(), 0.05));

    let s = MomentumSamples::gaussian(&fig1, 1.0, 1024).unwrap();
    let a = povm_from_samples(&s, 0.4, 20.0, 4000, PovmRegime::Full).unwrap().density;
    let b = povm_from_samples(&s, 0.8, 20.0, 4000, PovmRegime::Full).unwrap().density;
    let change = sup(a.iter().zip(&b).map(|(x, y)| (x - y).abs())) / sup(a.iter().copied());
    items.push(below("sup change under tau doubling", change, 0.02));
    report(9, "kernel r(eps)", &items);
}

#[test]
fn criterion_10_kijowski_agreement() {
    let g = GaussianSpec::with_a(10.0, 10.0, 1.0);
    let t_cl = g.t_cl(1.0);
    let s = MomentumSamples::gaussian(&g, 1.0, 1024).unwrap();
    let (t_max, n) = (21.0, 10_500);
    let povm = povm_from_samples(&s, 1.0, t_max, n, PovmRegime::LargeEtau).unwrap().density;
    let ts = TimeGrid::new(t_max, n).unwrap().ts();
    let kij = kijowski_density(&s, &ts);
    let dev = sup(povm.iter().zip(&kij).map(|(a, b)| (a - b).abs())) / sup(kij.iter().copied());
    report(
        10,
        "Kijowski agreement",
        &[
            below("sup relative deviation", dev, 0.02),
            below("POVM peak offset", (argmax(&ts, &povm) - t_cl).abs() / t_cl, 0.01),
            below("Kijowski peak offset", (argmax(&ts, &kij) - t_cl).abs() / t_cl, 0.01),
        ],
    );
}

#[test]
fn criterion_11_two_gaussian_interference() {
    let r = two_gaussian_comparison(20.0, 10.0, 1.0, 10.0, 1.0, 2.0, 4000).unwrap();
    report(
        11,
        "two-Gaussian interference",
        &[
            below("|ratio/1.25 - 1|", (r.ratio / 1.25 - 1.0).abs(), 0.05),
            below("peak agreement at t_cl1", r.peak_agreement[0], 0.03),
            below("peak agreement at t_cl2", r.peak_agreement[1], 0.03),
        ],
    );
}

#[test]
fn criterion_12_povm_axioms() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let states: Vec<_> = (0..100).map(|_| random_state(&mut rng)).collect();
    let mut items = vec![];
    for regime in [PovmRegime::Full, PovmRegime::Smeared] {
        let (mut min_p, mut min_n, mut exh): (f64, f64, f64) = (f64::INFINITY, f64::INFINITY, 0.0);
        for psi in &states {
            let r = toa_povm_density(psi, 0.05, 4.0, 400, regime, 1024).unwrap();
            min_p = min_p.min(r.density.iter().copied().fold(f64::INFINITY, f64::min));
            min_n = min_n.min(r.no_detect);
            exh = exh.max((r.detected() + r.no_detect - 1.0).abs());
        }
        let name = regime.name();
        items.push(above(format!("{name} min p(t)"), min_p, -1e-10));
        items.push(above(format!("{name} min p(N)"), min_n, -1e-10));
        items.push(below(format!("{name} |detected + p(N) - 1|"), exh, 1e-3));
    }

    // Strictly positive momenta.
    let g = GaussianSpec::with_a(10.0, 6.0, 1.0);
    let s = MomentumSamples::from_fn(0.0, 14.0, 2048, 1.0, |p| if p > 0.0 { g.momentum_amplitude(p) } else { C64::default() })
        .unwrap();
    let ts = TimeGrid::new(40.0, 8000).unwrap();
    let shifted: Vec<f64> = ts.ts().iter().map(|t| t - 15.0).collect();
    let total = integrate(&extended_density(&s, &shifted), ts.dt());
    items.push(below("|extended mass - 1|, one-sided state", (total - 1.0).abs(), 1e-3));
    report(12, "POVM axioms", &items);
}

#[test]
fn criterion_13_sequential_contextuality() {
    let psi = GaussianSpec::with_sigma0(0.0, 0.0, 0.5)
        .wave_packet(Grid1D::symmetric(20.0, 1024).unwrap(), 1.0)
        .unwrap();
    let u = [(-0.625, 0.625)];
    let fine = sequential_two_time_probability(&psi, 1.0, 0.15625, &u, &u).unwrap();
    let coarse = sequential_two_time_probability(&psi, 1.0, 0.3125, &u, &u).unwrap();
    report(
        13,
        "sequential-measurement witness",
        &[above("relative difference", (fine - coarse).abs() / fine.max(coarse), 0.1)],
    );
}
