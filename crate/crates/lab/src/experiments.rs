//! Named experiment suites. Each returns a table and the checks it evaluated.

use std::time::Instant;

use maxreg_core::analytic::{closed_loop_leading_eigenvalues, dirichlet_closed_form, neumann_leading_eigenvalues, nu_star};
use maxreg_core::maxreg::{maxreg_norm_estimate, maxreg_stability_sweep, EstimateMethod, GeneratorKind, SweepTable};
use maxreg_core::nonauto::{
    continuity_bound_check, nonauto_identity_residual, nonauto_maxreg_report, nonauto_solve, CoefficientProfile,
};
use maxreg_core::rbound::{
    admissibility_sup, feedback_sup, kappa_growth, log_spaced, rbound_estimate, sector_sup, trial_seed, yosida_term_norms,
    Contour, HalfPlaneSamples, OperatorFamily, RBoundReport,
};
use maxreg_core::semigroup::{canonical_shift, mild_solution, perturbed_mild_residual, vcf_residual, yosida_decomposition_residual};
use maxreg_core::{
    assemble_extended, dirichlet_map, generator_matrix, greiner_residual, make_grid, perturbation_matrix,
    resolvent_identity_residual, spectrum, transfer_value, BoundaryCondition, ExtendedSystem, GridFunction, LabError,
    TimeGrid, TimeSignal,
};
use num_complex::Complex64;

use crate::checks::{self, Check};
use crate::config::Config;
use crate::report::{num, quantity_row, Outcome, Table, QUANTITY_HEADER};

pub const EXPERIMENTS: &[&str] = &[
    "identities",
    "spectra",
    "dirichlet",
    "sector",
    "admissibility",
    "kappa",
    "rbound",
    "maxreg",
    "perturbed",
    "nonauto",
    "example-pde",
];

/// Failures that stop an experiment before its checks are evaluated.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("unknown experiment {0:?}")]
    Unknown(String),
    #[error(transparent)]
    Numerical(#[from] LabError),
    #[error("{0} did not converge")]
    NotConverged(String),
}

type Res<T> = std::result::Result<T, ExperimentError>;

struct Run<'a> {
    cfg: &'a Config,
    table: Table,
    checks: Vec<Check>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a Config, header: &[&'static str]) -> Self {
        Self { cfg, table: Table::new(header), checks: Vec::new() }
    }

    fn check(&mut self, name: &str, measured: f64) {
        let def = checks::lookup(name).expect("registered check");
        self.checks.push(Check::evaluate(def, measured, self.cfg.threshold(name)));
    }

    fn row(&mut self, quantity: &str, n: usize, point: Complex64, value: f64) {
        self.table.push(quantity_row(quantity, n, point, value));
    }

    fn finish(self, experiment: &'static str, started: Instant) -> Outcome {
        Outcome {
            experiment,
            table: self.table,
            checks: self.checks,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        }
    }
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn rel_change(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs().max(f64::MIN_POSITIVE)
}

fn system(n: usize) -> Res<ExtendedSystem> {
    Ok(assemble_extended(make_grid(n)?))
}

fn half_plane(cfg: &Config) -> HalfPlaneSamples {
    HalfPlaneSamples::log_radial(cfg.r_min, cfg.r_max, cfg.radii, cfg.angles, 1e-3)
}

fn coarse(n: usize) -> usize {
    (n / 2).max(maxreg_core::grid::MIN_CELLS)
}

/// Smooth test forcing used by the trajectory experiments.
fn forcing(tg: TimeGrid, n: usize) -> Res<TimeSignal> {
    let g = make_grid(n)?;
    Ok(TimeSignal::from_real_fn(tg, g, |t, s| {
        (1.0 + t) * (3.0 * s).cos() + (5.0 * t).sin() * s * s
    }))
}

pub fn run(name: &str, cfg: &Config) -> Res<Outcome> {
    let started = Instant::now();
    let (name, outcome) = match name {
        "identities" => ("identities", identities(cfg)?),
        "spectra" => ("spectra", spectra(cfg)?),
        "dirichlet" => ("dirichlet", dirichlet(cfg)?),
        "sector" => ("sector", sector(cfg)?),
        "admissibility" => ("admissibility", admissibility(cfg)?),
        "kappa" => ("kappa", kappa(cfg)?),
        "rbound" => ("rbound", rbound(cfg)?),
        "maxreg" => ("maxreg", maxreg(cfg)?),
        "perturbed" => ("perturbed", perturbed(cfg)?),
        "nonauto" => ("nonauto", nonauto(cfg)?),
        "example-pde" => ("example-pde", example_pde(cfg)?),
        other => return Err(ExperimentError::Unknown(other.to_string())),
    };
    Ok(outcome.finish(name, started))
}

const LAMBDAS: [Complex64; 3] = [Complex64::new(1.0, 0.0), Complex64::new(2.0, 3.0), Complex64::new(50.0, 0.0)];

fn identities(cfg: &Config) -> Res<Run<'_>> {
    let mut run = Run::new(cfg, QUANTITY_HEADER);
    let sys = system(cfg.n)?;
    let (mut res, mut gre) = (0.0f64, 0.0f64);
    for (i, &lambda) in LAMBDAS.iter().enumerate() {
        let r = resolvent_identity_residual(&sys, lambda)?;
        run.row("resolvent_multiplicative", cfg.n, lambda, r.multiplicative);
        run.row("resolvent_additive", cfg.n, lambda, r.additive);
        run.row("transfer_re", cfg.n, lambda, r.transfer.re);
        run.row("transfer_im", cfg.n, lambda, r.transfer.im);
        res = res.max(r.max());
        let mu = LAMBDAS[(i + 1) % LAMBDAS.len()];
        let g = greiner_residual(&sys, lambda, mu)?;
        run.row("greiner", cfg.n, lambda, g);
        gre = gre.max(g);
    }
    let mut yos = 0.0f64;
    for np in [50.0, 1e3] {
        let y = yosida_decomposition_residual(&sys, np)?;
        run.row("yosida_decomposition", cfg.n, c(np), y);
        yos = yos.max(y);
    }
    let g = sys.grid();
    let tg = TimeGrid::new(cfg.horizon, cfg.m)?;
    let x0 = GridFunction::from_real_fn(g, |s| (2.0 * s).cos());
    let f = TimeSignal::from_real_fn(tg, g, |t, s| (1.0 + t) * (3.0 * s).sin());
    let v = vcf_residual(&sys, &x0, &f)?;
    run.row("variation_of_constants", cfg.n, c(0.0), v);
    run.check("identities.resolvent", res);
    run.check("identities.greiner", gre);
    run.check("identities.yosida", yos);
    run.check("identities.vcf", v);
    Ok(run)
}

fn spectra(cfg: &Config) -> Res<Run<'_>> {
    let mut run = Run::new(cfg, &["generator", "index", "computed_re", "computed_im", "exact", "error"]);
    let sys = system(cfg.n)?;
    for (bc, label, exact, check) in [
        (BoundaryCondition::Free, "free", neumann_leading_eigenvalues(), "spectra.free_relative"),
        (BoundaryCondition::ClosedLoop, "closed-loop", closed_loop_leading_eigenvalues(), "spectra.closed_loop_relative"),
    ] {
        let ev = spectrum(&generator_matrix(&sys, bc)?)?;
        let mut worst = 0.0f64;
        for (i, (got, want)) in ev.iter().zip(exact).enumerate() {
            // absolute error for the zero eigenvalue, relative otherwise
            let err = if want == 0.0 { got.norm() } else { (got - want).norm() / want.abs() };
            worst = worst.max(err);
            run.table.push(vec![label.into(), i.to_string(), num(got.re), num(got.im), num(want), num(err)]);
        }
        run.check(check, worst);
    }
    Ok(run)
}

fn dirichlet_error(n: usize, lambda: Complex64) -> Res<f64> {
    let g = make_grid(n)?;
    let d = dirichlet_map(&assemble_extended(g), lambda)?;
    let mut worst = 0.0f64;
    for (s, v) in g.nodes().zip(d.profile().values()) {
        worst = worst.max((v - dirichlet_closed_form(lambda, s)?).norm());
    }
    Ok(worst)
}

fn dirichlet(cfg: &Config) -> Res<Run<'_>> {
    let mut run = Run::new(cfg, QUANTITY_HEADER);
    let (nc, nf) = (coarse(cfg.n), cfg.n);
    let mut dev = 0.0f64;
    for lambda in LAMBDAS {
        let (ec, ef) = (dirichlet_error(nc, lambda)?, dirichlet_error(nf, lambda)?);
        run.row("max_node_error", nc, lambda, ec);
        run.row("max_node_error", nf, lambda, ef);
        run.row("error_ratio", nf, lambda, ec / ef);
        dev = dev.max((ec / ef - 4.0).abs());
    }
    let k = transfer_value(&system(nf)?, c(1.0))?;
    run.row("transfer_re", nf, c(1.0), k.re);
    run.row("transfer_im", nf, c(1.0), k.im);
    run.check("dirichlet.order_ratio_deviation", dev);
    run.check("dirichlet.transfer_at_one_error", (k - 0.46212).norm());
    Ok(run)
}

fn sector(cfg: &Config) -> Res<Run<'_>> {
    let mut run = Run::new(cfg, QUANTITY_HEADER);
    let samples = half_plane(cfg);
    let mut cl_sups = Vec::new();
    for n in [coarse(cfg.n), cfg.n] {
        let sys = system(n)?;
        for (bc, label) in [(BoundaryCondition::Free, "free"), (BoundaryCondition::ClosedLoop, "closed-loop")] {
            let gen = generator_matrix(&sys, bc)?;
            let shifted = gen.shifted(canonical_shift(&[&gen])?);
            let r = sector_sup(&shifted, 0.0, &samples)?;
            run.row(&format!("{label}_sup"), n, r.argmax.unwrap_or_default(), r.sup);
            run.row(&format!("{label}_samples"), n, c(0.0), r.points.len() as f64);
            if bc == BoundaryCondition::Free && n == cfg.n {
                run.check("sector.free_sup", r.sup);
                run.check("sector.free_samples", r.points.len() as f64);
            }
            if bc == BoundaryCondition::ClosedLoop {
                cl_sups.push(r.sup);
            }
        }
    }
    run.check("sector.closed_loop_change", rel_change(cl_sups[0], cl_sups[1]));
    Ok(run)
}

fn admissibility(cfg: &Config) -> Res<Run<'_>> {
    let mut run = Run::new(cfg, QUANTITY_HEADER);
    let samples = half_plane(cfg);
    let mut m2 = Vec::new();
    let mut m3 = Vec::new();
    for n in [coarse(cfg.n), cfg.n] {
        let r = admissibility_sup(&system(n)?, cfg.p, &samples)?;
        run.row("m2_sup", n, r.m2.argmax.unwrap_or_default(), r.m2.sup);
        run.row("m3_sup", n, r.m3.argmax.unwrap_or_default(), r.m3.sup);
        run.row("shift", n, c(r.omega), r.omega);
        m2.push(r.m2.sup);
        m3.push(r.m3.sup);
    }
    run.check("admissibility.m2_change", rel_change(m2[0], m2[1]));
    run.check("admissibility.m3_change", rel_change(m3[0], m3[1]));

    let sys = system(cfg.n)?;
    let gen = generator_matrix(&sys, BoundaryCondition::Free)?;
    let alpha = canonical_shift(&[&gen])?;
    let nu = feedback_sup(&sys, alpha, &samples)?;
    run.row("feedback_sup", cfg.n, nu.argmax.unwrap_or_default(), nu.sup);
    run.row("feedback_skipped", cfg.n, c(alpha), nu.skipped.len() as f64);
    let at_one = 1.0 / (1.0 - transfer_value(&sys, c(1.0))?).norm();
    run.row("feedback_at_one", cfg.n, c(1.0), at_one);
    let far: Vec<Complex64> = log_spaced(1e2, 1e6, 5).into_iter().map(c).collect();
    let tail = feedback_sup(&sys, 0.0, &HalfPlaneSamples::from_points(far))?;
    for (z, v) in tail.points.iter().zip(&tail.values) {
        run.row("feedback_tail", cfg.n, *z, *v);
    }
    let last = tail.values.last().copied().unwrap_or(f64::NAN);
    run.check("feedback.at_one_error", (at_one - 1.859).abs());
    run.check("feedback.limit_gap", (1.0 / last - 1.0).abs());
    run.check("feedback.sup", nu.sup);
    Ok(run)
}

fn kappa(cfg: &Config) -> Res<Run<'_>> {
    let mut run = Run::new(cfg, &["n", "lambda", "norm", "scaled_norm"]);
    let lambdas = log_spaced(cfg.lambda_min, cfg.lambda_max, cfg.lambda_count);
    let mut sups = Vec::new();
    let mut slope = f64::NAN;
    for &n in &cfg.kappa_grids {
        let r = kappa_growth(&system(n)?, cfg.p, &lambdas)?;
        for (l, v) in r.lambdas.iter().zip(&r.norms) {
            run.table.push(vec![n.to_string(), num(*l), num(*v), num(l * v)]);
        }
        sups.push(r.weighted_sup);
        slope = r.slope_scaled;
    }
    let worst = sups.windows(2).map(|w| rel_change(w[0], w[1])).fold(0.0, f64::max);
    // the growth exponent of lambda d_lambda in L^p is (p - 1) / (2p)
    let expected = if cfg.p.is_infinite() { 0.5 } else { (cfg.p - 1.0) / (2.0 * cfg.p) };
    run.table.push(vec!["fit".into(), num(expected), num(slope), num(sups[sups.len() - 1])]);
    run.check("kappa.slope_deviation", (slope - expected).abs());
    run.check("kappa.weighted_sup_change", worst);
    Ok(run)
}

fn family_rows(run: &mut Run<'_>, r: &RBoundReport) {
    let n = run.cfg.n;
    run.row(&format!("{}:max_ratio", r.label), n, c(r.seed as f64), r.max_ratio);
    run.row(&format!("{}:p95_ratio", r.label), n, c(r.seed as f64), r.p95_ratio);
    run.row(&format!("{}:member_norm_max", r.label), n, c(r.seed as f64), r.member_norm_max);
    run.row(&format!("{}:estimate", r.label), n, c(r.seed as f64), r.estimate);
}

fn rbound(cfg: &Config) -> Res<Run<'_>> {
    let mut run = Run::new(cfg, QUANTITY_HEADER);
    let sys = system(cfg.n)?;
    let free = generator_matrix(&sys, BoundaryCondition::Free)?;
    let omega = canonical_shift(&[&free])?;
    let shifted = free.shifted(omega);
    let svals = log_spaced(cfg.s_min, cfg.s_max, cfg.s_count);
    let seeds = [cfg.seed, cfg.seed.wrapping_add(1)];
    let (k, trials) = (cfg.rbound_subset, cfg.rbound_trials);

    let single = OperatorFamily::resolvent(&shifted, Contour::Vertical { omega: 0.0 }, &svals[..1], 1.0)?;
    let r = rbound_estimate(&single, 1, trials, cfg.seed)?;
    family_rows(&mut run, &r);
    let member = single.members()[0].norm();
    run.check("rbound.singleton_error", (r.estimate - member).abs() / member);

    let res = OperatorFamily::resolvent(&shifted, Contour::Vertical { omega: 0.0 }, &svals, 1.0)?;
    let mut worst = 0.0f64;
    for seed in seeds {
        let r = rbound_estimate(&res, k, trials, seed)?;
        family_rows(&mut run, &r);
        worst = worst.max(r.max_ratio);
    }
    run.check("rbound.resolvent_max_ratio", worst);

    for contour in [Contour::Vertical { omega }, Contour::RealShift { shift: omega }] {
        let fams = [
            (OperatorFamily::dirichlet(&sys, contour, &svals, 0.5)?, "rbound.dirichlet_seed_change"),
            (OperatorFamily::observation(&sys, contour, &svals, 0.5)?, "rbound.observation_seed_change"),
        ];
        for (fam, check) in fams {
            let est: Vec<RBoundReport> =
                seeds.iter().map(|&s| rbound_estimate(&fam, k, trials, s)).collect::<Result<_, _>>()?;
            let mut fam_rows = Vec::new();
            for r in &est {
                let mut r = r.clone();
                r.label = format!("{}@{}", r.label, contour_label(contour));
                fam_rows.push(r);
            }
            for r in &fam_rows {
                family_rows(&mut run, r);
            }
            if matches!(contour, Contour::Vertical { .. }) {
                run.check(check, rel_change(est[0].estimate, est[1].estimate));
            }
        }
    }
    Ok(run)
}

fn contour_label(c: Contour) -> &'static str {
    match c {
        Contour::Vertical { .. } => "vertical",
        Contour::RealShift { .. } => "real",
    }
}

fn sweep_rows(run: &mut Run<'_>, table: &SweepTable) {
    for row in &table.rows {
        run.table.push(vec![
            table.kind.label().into(),
            row.n.to_string(),
            num(row.shift),
            num(row.estimate.value),
            row.estimate.iterations.to_string(),
            row.estimate.converged.to_string(),
        ]);
    }
}

const SWEEP_HEADER: &[&str] = &["generator", "n", "shift", "estimate", "iterations", "converged"];

fn method(cfg: &Config) -> EstimateMethod {
    if cfg.p == 2.0 {
        EstimateMethod::ExactP2
    } else {
        EstimateMethod::RandomSearch { trials: cfg.search_trials, seed: cfg.seed }
    }
}

fn require_converged(table: &SweepTable) -> Res<()> {
    match table.rows.iter().find(|r| !r.estimate.converged) {
        Some(r) => Err(ExperimentError::NotConverged(format!("norm estimate for {} at n = {}", table.kind.label(), r.n))),
        None => Ok(()),
    }
}

fn maxreg(cfg: &Config) -> Res<Run<'_>> {
    let mut run = Run::new(cfg, SWEEP_HEADER);
    let tg = TimeGrid::new(cfg.horizon, cfg.m)?;
    let free = GeneratorKind::Free.generator(cfg.n)?;
    let shift = canonical_shift(&[&free])?;
    let est = maxreg_norm_estimate(&free.shifted(shift), tg, cfg.p, method(cfg))?;
    if !est.converged {
        return Err(ExperimentError::NotConverged("free norm estimate".into()));
    }
    run.table.push(vec![
        "free".into(),
        cfg.n.to_string(),
        num(shift),
        num(est.value),
        est.iterations.to_string(),
        est.converged.to_string(),
    ]);
    run.check("maxreg.free_exact", est.value);
    let sweep = maxreg_stability_sweep(GeneratorKind::ClosedLoop, &cfg.grids, tg, cfg.p, cfg.seed)?;
    require_converged(&sweep)?;
    sweep_rows(&mut run, &sweep);
    run.check("maxreg.closed_loop_change", sweep.max_relative_change);
    Ok(run)
}

fn perturbed(cfg: &Config) -> Res<Run<'_>> {
    let mut run = Run::new(cfg, SWEEP_HEADER);
    let tg = TimeGrid::new(cfg.horizon, cfg.m)?;
    let kind = GeneratorKind::Perturbed { b: cfg.perturb_b, c: cfg.perturb_c };
    let sweep = maxreg_stability_sweep(kind, &cfg.grids, tg, cfg.p, cfg.seed)?;
    require_converged(&sweep)?;
    sweep_rows(&mut run, &sweep);
    run.check("perturbed.sweep_change", sweep.max_relative_change);
    // gap between the perturbed generator and the closed loop forced by P z + f
    for m in [cfg.m / 2, cfg.m] {
        let tg = TimeGrid::new(cfg.horizon, m)?;
        let g = make_grid(cfg.n)?;
        let p = perturbation_matrix(g, &GridFunction::constant(g, c(cfg.perturb_b)), &GridFunction::constant(g, c(cfg.perturb_c)))?;
        let r = perturbed_mild_residual(&assemble_extended(g), &p, &forcing(tg, cfg.n)?)?;
        run.table.push(vec!["mild-gap".into(), cfg.n.to_string(), num(0.0), num(r), m.to_string(), "true".into()]);
    }
    Ok(run)
}

fn nonauto(cfg: &Config) -> Res<Run<'_>> {
    let mut run = Run::new(cfg, QUANTITY_HEADER);
    let prof = CoefficientProfile::affine(cfg.nonauto_a0, cfg.nonauto_slope, cfg.horizon)?;
    let nu = nu_star();
    let decay_error = |n: usize, m: usize| -> Res<f64> {
        let g = make_grid(n)?;
        let tg = TimeGrid::new(cfg.horizon, m)?;
        let x0 = GridFunction::from_real_fn(g, |s| (nu * s).cos());
        let z = nonauto_solve(&assemble_extended(g), &prof, &TimeSignal::zeros(tg, g), &x0)?;
        let exact = TimeSignal::from_real_fn(tg, g, |t, s| (-nu * nu * prof.integral(t)).exp() * (nu * s).cos());
        Ok(z.sub(&exact).max_abs())
    };
    let (n1, n2) = (coarse(coarse(cfg.n)), coarse(cfg.n));
    let (e1, e2) = (decay_error(n1, 2 * n1)?, decay_error(n2, 2 * n2)?);
    run.row("decay_error", n1, c(2.0 * n1 as f64), e1);
    run.row("decay_error", n2, c(2.0 * n2 as f64), e2);
    run.check("nonauto.order", (e1 / e2).log2());

    let sys = system(cfg.n)?;
    let mu0 = 1.0;
    let mut worst = 0.0f64;
    for t in [0.0, 0.5 * cfg.horizon, cfg.horizon] {
        let r = nonauto_identity_residual(&sys, &prof, mu0, t)?;
        run.row("identity", cfg.n, c(t), r);
        worst = worst.max(r);
    }
    run.check("nonauto.identity", worst);

    let mut slack = f64::NEG_INFINITY;
    for i in 0..cfg.continuity_pairs as u64 {
        let unit = |k: u64| (trial_seed(cfg.seed, k) >> 11) as f64 / (1u64 << 53) as f64;
        let (t, s) = (unit(2 * i) * cfg.horizon, unit(2 * i + 1) * cfg.horizon);
        let (first, second) = continuity_bound_check(&sys, &prof, t, s, mu0)?;
        run.row("continuity_closed_loop", cfg.n, Complex64::new(t, s), first);
        run.row("continuity_free", cfg.n, Complex64::new(t, s), second);
        slack = slack.max(first - second);
    }
    run.check("nonauto.continuity_slack", slack.max(0.0));

    let tg = TimeGrid::new(cfg.horizon, cfg.m)?;
    let mut ratios = Vec::new();
    for &n in &cfg.grids {
        let r = nonauto_maxreg_report(&system(n)?, &prof, &forcing(tg, n)?, cfg.p)?;
        run.row("maxreg_ratio", n, c(0.0), r.ratio);
        run.row("maxreg_residual", n, c(0.0), r.residual);
        ratios.push(r.ratio);
    }
    run.check("nonauto.maxreg_change", ratios.windows(2).map(|w| rel_change(w[0], w[1])).fold(0.0, f64::max));
    Ok(run)
}

fn example_pde(cfg: &Config) -> Res<Run<'_>> {
    let mut run = Run::new(cfg, QUANTITY_HEADER);
    let nu = nu_star();
    let phi = |t: f64| 1.0 + t + (2.0 * t).sin();
    let dphi = |t: f64| 1.0 + 2.0 * (2.0 * t).cos();
    let error = |n: usize, m: usize| -> Res<f64> {
        let g = make_grid(n)?;
        let tg = TimeGrid::new(cfg.horizon, m)?;
        let f = TimeSignal::from_real_fn(tg, g, |t, s| (dphi(t) + nu * nu * phi(t)) * (nu * s).cos());
        let x0 = GridFunction::from_real_fn(g, |s| (nu * s).cos());
        let a = generator_matrix(&assemble_extended(g), BoundaryCondition::ClosedLoop)?;
        let z = mild_solution(&a, &f, &x0)?;
        Ok(z.sub(&TimeSignal::from_real_fn(tg, g, |t, s| phi(t) * (nu * s).cos())).max_abs())
    };
    let (nc, mc) = (coarse(cfg.n), (cfg.m / 2).max(maxreg_core::grid::MIN_STEPS));
    let (ec, ef) = (error(nc, mc)?, error(cfg.n, cfg.m)?);
    run.row("manufactured_error", nc, c(mc as f64), ec);
    run.row("manufactured_error", cfg.n, c(cfg.m as f64), ef);
    run.check("example.manufactured_order", (ec / ef).log2());

    let sys = system(cfg.n)?;
    let tg = TimeGrid::new(cfg.horizon, cfg.m)?;
    let f = forcing(tg, cfg.n)?;
    let mut worst = 0.0f64;
    for np in [50.0, 1e3] {
        let r = yosida_term_norms(&sys, np, &f, cfg.p)?;
        for (i, v) in r.terms.iter().enumerate() {
            run.row(&format!("yosida_term_{}", i + 1), cfg.n, c(np), *v);
        }
        run.row("yosida_sum", cfg.n, c(np), r.sum_norm);
        run.row("yosida_direct", cfg.n, c(np), r.direct_norm);
        run.row("forcing", cfg.n, c(np), r.f_norm);
        worst = worst.max(r.residual);
    }
    run.check("example.yosida_terms_residual", worst);
    Ok(run)
}
