//! Dispatch from a validated config to the engine.

use gibbs_forge::approx::{
    bound_validity, matern_experiment, summarize_rates, BoundBudget, BoundGeometry, MaternBudget, Thinning,
    ValidityBudget,
};
use gibbs_forge::coupling::{certify_disagreement, disagreement_couple, dominated};
use gibbs_forge::diagnostics::{empty_space_bounds, gnz_test, one_arm, EmptySpaceBudget};
use gibbs_forge::gibbs::RetentionConfig;
use gibbs_forge::models::{Intensity, Model};
use gibbs_forge::rng::{map_replicates, tags};
use gibbs_forge::samplers::{Sampler, SamplerOptions};
use gibbs_forge::{Point, StreamSeed, Window};
use serde::Serialize;

use crate::config::{Experiment, Validated};
use crate::output::{Results, Table};
use crate::{CliError, Clock};

/// Replicates handed to the pool between wall-clock checks.
const CHUNK: usize = 256;

pub fn execute(v: &Validated, clock: &Clock) -> Result<Results, CliError> {
    let seed = StreamSeed::new(v.config.seed);
    match v.config.experiment {
        Experiment::Sample => sample(v, seed, clock),
        Experiment::Couple => couple(v, seed, clock),
        Experiment::Gnz => gnz(v, seed, clock),
        Experiment::EmptySpace => empty_space(v, seed),
        Experiment::OneArm => arm(v, seed),
        Experiment::Bounds => bounds(v, seed),
        Experiment::Matern => matern(v, seed, clock),
        Experiment::Validate => {
            let scale = v.config.params.scale.unwrap_or(1.0);
            let rows = crate::validate::validate_corpus(v.config.seed, scale, clock)?;
            let failed = rows.rows.iter().filter(|r| !r.pass).count();
            let summary = vec![format!("{} checks, {failed} failed", rows.rows.len())];
            Ok(Results { tables: vec![Table::from_rows("validate.csv", &rows.rows)?], partial: rows.partial, summary, failed })
        }
    }
}

fn model(v: &Validated) -> &Model {
    v.model.as_ref().expect("validated configs carry a model")
}

fn window(v: &Validated) -> Window {
    v.window.expect("validated configs carry a window")
}

fn retention(v: &Validated) -> RetentionConfig {
    RetentionConfig { n_z: v.config.budget.n_z, ..Default::default() }
}

/// Runs `f` over `0..n` in chunks, stopping early once the clock expires.
fn chunked<T: Send>(n: usize, clock: &Clock, f: impl Fn(u64) -> T + Sync + Send) -> (Vec<T>, bool) {
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        if clock.expired() {
            return (out, true);
        }
        let len = CHUNK.min(n - start);
        out.extend(map_replicates(len, |i| f(start as u64 + i)));
        start += len;
    }
    (out, false)
}

fn mean_nn(pts: &[Point]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let total: f64 = pts
        .iter()
        .enumerate()
        .map(|(i, p)| pts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| p.dist(q)).fold(f64::INFINITY, f64::min))
        .sum();
    total / pts.len() as f64
}

#[derive(Serialize)]
struct SampleRow {
    replicate: u64,
    count: usize,
    mean_nn_distance: f64,
}

fn sample(v: &Validated, seed: StreamSeed, clock: &Clock) -> Result<Results, CliError> {
    let m = model(v);
    let w = window(v);
    let sampler = v.config.params.sampler.unwrap_or(Sampler::Embed);
    let opts = SamplerOptions { retention: retention(v), ..Default::default() };
    let boundary = v.boundary.points();
    let (rows, partial) = chunked(v.config.budget.replicates, clock, |i| {
        sampler.sample(m, &w, boundary, &opts, seed.path(&[tags::REPLICATE, i])).map(|x| SampleRow {
            replicate: i,
            count: x.len(),
            mean_nn_distance: mean_nn(x.points()),
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mean = rows.iter().map(|r| r.count as f64).sum::<f64>() / rows.len().max(1) as f64;
    let summary = vec![format!("{} draws with {}, mean count {mean:.4}", rows.len(), sampler.name())];
    Ok(Results { tables: vec![Table::from_rows("sample.csv", &rows)?], partial, summary, failed: 0 })
}

#[derive(Serialize)]
struct CoupleRow {
    replicate: u64,
    xi: usize,
    xi_prime: usize,
    disagreement: usize,
    stages: usize,
    terminated_at: usize,
    certified: bool,
    dominated: bool,
    capped: usize,
}

fn couple(v: &Validated, seed: StreamSeed, clock: &Clock) -> Result<Results, CliError> {
    let m = model(v);
    let w = window(v);
    let cfg = retention(v);
    let (rows, partial) = chunked(v.config.budget.replicates, clock, |i| {
        disagreement_couple(m, &w, &v.boundary, &v.boundary_prime, &cfg, seed.path(&[tags::REPLICATE, i])).map(|r| {
            CoupleRow {
                replicate: i,
                xi: r.xi.len(),
                xi_prime: r.xi_prime.len(),
                disagreement: r.disagreement.len(),
                stages: r.layers.len(),
                terminated_at: r.terminated_at,
                certified: certify_disagreement(&r, &m.relation(), m.reach()),
                dominated: dominated(&r),
                capped: r.capped,
            }
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let bad = rows.iter().filter(|r| !r.certified || !r.dominated).count();
    let summary = vec![format!("{} coupled runs, {bad} failed certification", rows.len())];
    Ok(Results { tables: vec![Table::from_rows("couple.csv", &rows)?], partial, summary, failed: bad })
}

#[derive(Serialize)]
struct GnzRow {
    function: String,
    sampler: String,
    replicates: usize,
    lhs: f64,
    lhs_se: f64,
    rhs: f64,
    rhs_se: f64,
    z: f64,
    pass: bool,
}

fn gnz(v: &Validated, seed: StreamSeed, clock: &Clock) -> Result<Results, CliError> {
    let m = model(v);
    let w = window(v);
    let sampler = v.config.params.sampler.unwrap_or(Sampler::Rejection);
    let opts = SamplerOptions { retention: retention(v), ..Default::default() };
    let nodes = v.config.params.nodes.unwrap_or(64);
    let mut rows = Vec::new();
    let mut partial = false;
    for (k, f) in v.config.params.functions.iter().enumerate() {
        if clock.expired() {
            partial = true;
            break;
        }
        let r = gnz_test(m, m, sampler, &opts, &w, v.boundary.points(), f, v.config.budget.replicates, nodes, seed.child(k as u64))?;
        rows.push(GnzRow {
            function: r.function,
            sampler: r.sampler,
            replicates: r.lhs.replicates,
            lhs: r.lhs.estimate,
            lhs_se: r.lhs.std_error,
            rhs: r.rhs.estimate,
            rhs_se: r.rhs.std_error,
            z: r.z,
            pass: r.z.abs() < 4.0,
        });
    }
    let summary = rows.iter().map(|r| format!("{:<10} z = {:+.3}", r.function, r.z)).collect();
    let failed = rows.iter().filter(|r| !r.pass).count();
    Ok(Results { tables: vec![Table::from_rows("gnz.csv", &rows)?], partial, summary, failed })
}

#[derive(Serialize)]
struct EmptyRow {
    replicates: usize,
    lower: f64,
    mc: f64,
    mc_se: f64,
    identity: f64,
    identity_se: f64,
    upper_loc1: f64,
    upper_loc1_se: f64,
    upper_loc2: Option<f64>,
    upper_loc2_se: Option<f64>,
    upper: f64,
    upper_se: f64,
    sandwiched: bool,
}

fn empty_space(v: &Validated, seed: StreamSeed) -> Result<Results, CliError> {
    let region = v.config.params.region.expect("validated");
    let budget = EmptySpaceBudget { replicates: v.config.budget.replicates, ..Default::default() };
    let r = empty_space_bounds(model(v), &window(v), &region, &v.boundary, &budget, seed)?;
    let row = EmptyRow {
        replicates: r.mc.replicates,
        lower: r.lower,
        mc: r.mc.estimate,
        mc_se: r.mc.std_error,
        identity: r.identity,
        identity_se: r.identity_se,
        upper_loc1: r.upper_loc1,
        upper_loc1_se: r.upper_loc1_se,
        upper_loc2: r.upper_loc2,
        upper_loc2_se: r.upper_loc2_se,
        upper: r.upper,
        upper_se: r.upper_se,
        sandwiched: r.sandwiched(3.0),
    };
    let summary = vec![format!("{:.5} <= {:.5} ± {:.5} <= {:.5}", r.lower, r.mc.estimate, r.mc.std_error, r.upper)];
    Ok(Results { tables: vec![Table::from_rows("empty_space.csv", &[row])?], partial: false, summary, failed: 0 })
}

#[derive(Serialize)]
struct ArmRow {
    u: f64,
    v: f64,
    arm: f64,
    arm_se: f64,
    typical: f64,
    typical_se: f64,
    bound: f64,
    bound_se: f64,
    holds: bool,
}

#[derive(Serialize)]
struct FitRow {
    alpha: f64,
    c1: Option<f64>,
    c2: Option<f64>,
    c2_lo: Option<f64>,
    c2_hi: Option<f64>,
    possibly_supercritical: Option<bool>,
}

fn arm(v: &Validated, seed: StreamSeed) -> Result<Results, CliError> {
    let m = model(v);
    let p = &v.config.params;
    let alpha = p.alpha.unwrap_or(m.alpha_bar());
    let g = one_arm(&m.relation(), m.marks(), m.dim(), alpha, &p.us, &p.vs, v.config.budget.replicates, seed)?;
    let rows: Vec<ArmRow> = g
        .cells
        .iter()
        .map(|c| ArmRow {
            u: c.u,
            v: c.v,
            arm: c.arm.estimate,
            arm_se: c.arm.std_error,
            typical: c.typical.estimate,
            typical_se: c.typical.std_error,
            bound: c.bound,
            bound_se: c.bound_se,
            holds: c.holds,
        })
        .collect();
    let fit = FitRow {
        alpha,
        c1: g.fit.map(|f| f.c1),
        c2: g.fit.map(|f| f.c2),
        c2_lo: g.fit.map(|f| f.c2_ci.0),
        c2_hi: g.fit.map(|f| f.c2_ci.1),
        possibly_supercritical: g.fit.map(|f| f.possibly_supercritical),
    };
    let held = rows.iter().filter(|r| r.holds).count();
    let mut summary = vec![format!("{held}/{} cells within the bound", rows.len())];
    if let Some(f) = g.fit {
        summary.push(format!("decay rate {:.4} (95% CI {:.4} to {:.4})", f.c2, f.c2_ci.0, f.c2_ci.1));
    }
    Ok(Results {
        tables: vec![Table::from_rows("one_arm.csv", &rows)?, Table::from_rows("one_arm_fit.csv", &[fit])?],
        partial: false,
        summary,
        failed: 0,
    })
}

#[derive(Serialize)]
struct BoundRow {
    model: String,
    nu_density: f64,
    mean_count: f64,
    mean_count_se: f64,
    tv: f64,
    tv_se: f64,
    tv_raw: f64,
    discrepancy: f64,
    t1: f64,
    t2: f64,
    t3: f64,
    bound: f64,
    bound_se: f64,
    holds: bool,
}

fn bounds(v: &Validated, seed: StreamSeed) -> Result<Results, CliError> {
    let m = model(v);
    let w = window(v);
    let p = &v.config.params;
    let rule = p.thinning.expect("validated");
    let r = p.r_radius.unwrap_or(rule.reach().max(1e-9));
    let s = p.s_radius.unwrap_or(r + m.reach());
    let margin = p.domain_margin.unwrap_or(s + m.reach());
    let geom = BoundGeometry { window: w, domain: w.expanded(margin)?, r_radius: r, s_radius: s };
    let n = v.config.budget.replicates;
    let budget = ValidityBudget {
        pilot: n,
        replicates: n,
        bound: BoundBudget { replicates: n, ..Default::default() },
        ..Default::default()
    };
    let b = bound_validity(m, &rule, &geom, &budget, seed)?;
    let row = BoundRow {
        model: b.model.clone(),
        nu_density: b.nu_density,
        mean_count: b.mean_count.estimate,
        mean_count_se: b.mean_count.std_error,
        tv: b.tv.tv,
        tv_se: b.tv.std_error,
        tv_raw: b.tv.raw,
        discrepancy: b.bound.intensity_discrepancy.estimate,
        t1: b.bound.t1.estimate,
        t2: b.bound.t2.estimate,
        t3: b.bound.t3.estimate,
        bound: b.bound.total,
        bound_se: b.bound.total_se,
        holds: b.holds,
    };
    let summary = vec![format!("tv {:.5} ± {:.5}, bound {:.5} ± {:.5}", b.tv.tv, b.tv.std_error, b.bound.total, b.bound.total_se)];
    Ok(Results { tables: vec![Table::from_rows("bounds.csv", &[row])?], partial: false, summary, failed: 0 })
}

#[derive(Serialize)]
struct MaternRow {
    n: f64,
    u_n: f64,
    u_n_closed_form: Option<f64>,
    bracket_lo: f64,
    bracket_hi: f64,
    calibrated: f64,
    check: f64,
    check_se: f64,
    growth: f64,
    mean_count: f64,
    mean_count_se: f64,
    reference_mass: f64,
    kept_fraction: f64,
    tv: f64,
    tv_se: f64,
    bound: f64,
    bound_se: f64,
}

#[derive(Serialize)]
struct SlopeRow {
    tv_slope: Option<f64>,
    bound_slope: Option<f64>,
    tv_monotone: bool,
}

fn matern(v: &Validated, seed: StreamSeed, clock: &Clock) -> Result<Results, CliError> {
    let m = model(v);
    let c = v.config.params.c.expect("validated");
    let budget = MaternBudget { replicates: v.config.budget.replicates, ..Default::default() };
    let mut ns = v.config.params.ns.clone();
    ns.sort_by(f64::total_cmp);
    let mut exps = Vec::new();
    let mut partial = false;
    for (k, &n) in ns.iter().enumerate() {
        if clock.expired() {
            partial = true;
            break;
        }
        exps.push(matern_experiment(m, c, n, &budget, seed.child(k as u64))?);
    }
    let probe = summarize_rates(exps);
    let rows: Vec<MaternRow> = probe
        .rows
        .iter()
        .map(|e| MaternRow {
            n: e.n,
            u_n: e.calibration.u_n,
            u_n_closed_form: e.calibration.closed_form,
            bracket_lo: e.calibration.bracket.0,
            bracket_hi: e.calibration.bracket.1,
            calibrated: e.calibration.calibrated,
            check: e.calibration.check.estimate,
            check_se: e.calibration.check.std_error,
            growth: e.calibration.growth,
            mean_count: e.mean_count.estimate,
            mean_count_se: e.mean_count.std_error,
            reference_mass: e.reference_mass,
            kept_fraction: 1.0 - e.seam_discard_fraction,
            tv: e.tv.tv,
            tv_se: e.tv.std_error,
            bound: e.bound.total,
            bound_se: e.bound.total_se,
        })
        .collect();
    let slope = SlopeRow { tv_slope: probe.tv_slope, bound_slope: probe.bound_slope, tv_monotone: probe.tv_monotone };
    let mut summary: Vec<String> =
        rows.iter().map(|r| format!("n {:>7}  u_n {:.4}  tv {:.4} ± {:.4}  bound {:.4}", r.n, r.u_n, r.tv, r.tv_se, r.bound)).collect();
    summary.push(format!("tv non-increasing: {}", probe.tv_monotone));
    Ok(Results {
        tables: vec![Table::from_rows("matern.csv", &rows)?, Table::from_rows("matern_slopes.csv", &[slope])?],
        partial,
        summary,
        failed: 0,
    })
}
