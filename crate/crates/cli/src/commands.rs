use crate::inputs::*;
use crate::report::{module, pq_list, usage, CliError, Row, RunReport, Verdict};
use crate::SystemArgs;
use clap::{Args, ValueEnum};
use kcl_core::chain::verify_ve;
use kcl_core::circle::*;
use kcl_core::equidecomp::*;
use kcl_core::mc::{sample_rng, Moments};
use kcl_core::odometer::*;
use kcl_core::poset::{check_epodur, epodur_sweep, torus_triangle_stats};
use kcl_core::rational::{int, to_f64, to_pq, Rational};
use kcl_core::renewal::*;
use kcl_core::returns::{evaluate_identity, Identity, IdentityParams, IdentityReport, Path};
use kcl_core::sweep::{random_covering_torus, random_instance, RandomInstance};
use kcl_core::FiniteSystem;
use num_traits::{One, Zero};
use rayon::prelude::*;

fn need_seed(seed: Option<u64>, what: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| usage(format!("--seed is required for {what}")))
}

/// Rows for every equality group of an identity report, plus its notes.
fn report_rows(rep: &IdentityReport, params: &str, out: &mut Vec<Row>) {
    let params = if rep.params.is_empty() {
        params.to_string()
    } else {
        format!("{params};{}", rep.params)
    };
    for c in &rep.checks {
        let values = c
            .sides
            .iter()
            .map(|s| {
                let tag = match s.path {
                    Path::Direct => "direct",
                    Path::Chain => "chain",
                };
                format!("{}[{tag}]={}", s.label, to_pq(&s.value))
            })
            .collect::<Vec<_>>()
            .join(";");
        out.push(Row::exact(format!("{}.{}", rep.identity, c.label), &params, values, "all equal", c.equal()));
    }
    if rep.checks.is_empty() {
        out.push(Row::exact(&rep.identity, &params, "", "at least one check", false));
    }
    for n in &rep.notes {
        out.push(Row::info(format!("{}.note", rep.identity), &params, n));
    }
}

// ---------------------------------------------------------------- instances

#[derive(Args, Debug)]
pub struct InstanceArgs {
    #[command(flatten)]
    pub sys: SystemArgs,
    /// Number of random instances instead of an explicit system.
    #[arg(long)]
    pub random: Option<u64>,
    /// Point bound for random instances.
    #[arg(long, default_value_t = 24)]
    pub max_points: usize,
    /// Dimension of random instances; alternates 1 and 2 when absent.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Second set for two-set kernels (defaults to `E`).
    #[arg(long)]
    pub e2: Option<String>,
    /// Function values `f(0),...,f(N-1)` as rationals (defaults to 1).
    #[arg(long)]
    pub f: Option<String>,
    /// Weight table `s(0),...,s(N)` (defaults to 1).
    #[arg(long)]
    pub s: Option<String>,
    /// Forward gaps `r1,...,rm`.
    #[arg(long, default_value = "1")]
    pub gaps: String,
    /// Backward gaps.
    #[arg(long, default_value = "1")]
    pub back_gaps: String,
}

fn positive_gaps(s: &str, what: &str) -> Result<Vec<u64>, CliError> {
    let g = parse_u64s(s, what)?;
    if g.is_empty() || g.contains(&0) {
        return Err(usage(format!("{what}: entries must be positive")));
    }
    Ok(g)
}

fn instances(a: &InstanceArgs, seed: Option<u64>) -> Result<Vec<RandomInstance>, CliError> {
    if let Some(count) = a.random {
        if a.sys.given() {
            return Err(usage("--random cannot be combined with an explicit system"));
        }
        let seed = need_seed(seed, "random sweeps")?;
        if let Some(d) = a.dim {
            if !(1..=2).contains(&d) {
                return Err(usage("--dim must be 1 or 2"));
            }
        }
        if a.max_points < 2 {
            return Err(usage("--max-points must be at least 2"));
        }
        return Ok((0..count)
            .into_par_iter()
            .map(|i| random_instance(case_seed(seed, i), a.dim.unwrap_or(1 + i as usize % 2), a.max_points))
            .collect());
    }
    let system = a.sys.system()?;
    let n = system.len();
    let e = a.sys.set(n)?;
    let e2 = match &a.e2 {
        Some(s) => parse_set(s, n, "--e2")?,
        None => e.clone(),
    };
    let f = match &a.f {
        Some(s) => parse_rationals(s, n, "--f")?,
        None => vec![Rational::one(); n],
    };
    let s = match &a.s {
        Some(s) => parse_rationals(s, n + 1, "--s")?,
        None => vec![Rational::one(); n + 1],
    };
    Ok(vec![RandomInstance {
        seed: seed.unwrap_or(0),
        system,
        e,
        e2,
        f,
        s,
        gaps: positive_gaps(&a.gaps, "--gaps")?,
        back_gaps: positive_gaps(&a.back_gaps, "--back-gaps")?,
    }])
}

fn instance_params(i: usize, inst: &RandomInstance) -> String {
    format!("case={i};seed={};d={};N={}", inst.seed, inst.system.dim(), inst.system.len())
}

/// Runs `f` on every instance in parallel, keeping the input order.
fn per_instance<F>(list: &[RandomInstance], f: F) -> Result<Vec<Row>, CliError>
where
    F: Fn(usize, &RandomInstance) -> Result<Vec<Row>, CliError> + Sync,
{
    let parts = list
        .par_iter()
        .enumerate()
        .map(|(i, inst)| f(i, inst))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(parts.into_iter().flatten().collect())
}

// ---------------------------------------------------------------- ve-check

#[derive(Args, Debug)]
pub struct VeCheckArgs {
    #[command(flatten)]
    pub inst: InstanceArgs,
}

pub fn ve_check(a: &VeCheckArgs, seed: Option<u64>, report: &mut RunReport) -> Result<(), CliError> {
    let list = instances(&a.inst, seed)?;
    let rows = per_instance(&list, |i, inst| {
        let params = instance_params(i, inst);
        let mut rows = Vec::new();
        for (name, k) in inst.kernels().map_err(module("chain"))? {
            let rep = verify_ve(&k, &inst.system);
            let values = rep
                .expectations
                .iter()
                .enumerate()
                .map(|(j, v)| format!("v{j}={}", to_pq(v)))
                .collect::<Vec<_>>()
                .join(";");
            rows.push(Row::exact(format!("ve.{name}"), &params, values, "all equal", rep.equal));
        }
        let kac = evaluate_identity(&inst.system, &inst.identity_params(Identity::Kac), Identity::Kac)
            .map_err(module("returns"))?;
        report_rows(&kac, &params, &mut rows);
        Ok(rows)
    })?;
    report.rows = rows;
    Ok(())
}

// ---------------------------------------------------------------- identities

#[derive(Args, Debug)]
pub struct IdentitiesArgs {
    #[command(flatten)]
    pub inst: InstanceArgs,
    /// Identity mnemonic, or `all`.
    #[arg(long, default_value = "all")]
    pub identity: String,
    /// Horizon `n` for identities that take one.
    #[arg(long)]
    pub n: Option<u64>,
    /// Number of weight tables per instance for SSDIST.
    #[arg(long, default_value_t = 1)]
    pub s_tables: usize,
}

pub fn identities(a: &IdentitiesArgs, seed: Option<u64>, report: &mut RunReport) -> Result<(), CliError> {
    let ids: Vec<Identity> = if a.identity.eq_ignore_ascii_case("all") {
        Identity::ALL.to_vec()
    } else {
        a.identity
            .split(',')
            .map(|s| s.trim().parse::<Identity>().map_err(|e| usage(e.to_string())))
            .collect::<Result<_, _>>()?
    };
    if a.s_tables == 0 {
        return Err(usage("--s-tables must be positive"));
    }
    let list = instances(&a.inst, seed)?;
    let rows = per_instance(&list, |i, inst| {
        let base = instance_params(i, inst);
        let mut rows = Vec::new();
        for &id in &ids {
            let mut params = inst.identity_params(id);
            if let Some(n) = a.n {
                params = params.with_n(n);
            }
            let tables = if id == Identity::SsDist && a.inst.s.is_none() {
                inst.s_tables(a.s_tables)
            } else {
                vec![inst.s.clone()]
            };
            for (j, s) in tables.into_iter().enumerate() {
                let p: IdentityParams = params.clone().with_s(s);
                let rep = evaluate_identity(&inst.system, &p, id).map_err(module("returns"))?;
                let tag = if id == Identity::SsDist { format!("{base};s-table={j}") } else { base.clone() };
                report_rows(&rep, &tag, &mut rows);
            }
        }
        Ok(rows)
    })?;
    report.rows = rows;
    Ok(())
}

// ---------------------------------------------------------------- epodur

#[derive(Args, Debug)]
pub struct EpodurArgs {
    #[command(flatten)]
    pub sys: SystemArgs,
    /// Box side `H` of the search region `[0, H]^d`.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Single `z` as `a,b,...`; every `z` in the box when absent.
    #[arg(long)]
    pub z: Option<String>,
    /// Number of random covering tori instead of an explicit system.
    #[arg(long)]
    pub random: Option<u64>,
    /// Largest side of random tori.
    #[arg(long, default_value_t = 6)]
    pub max_side: usize,
}

pub fn epodur(a: &EpodurArgs, seed: Option<u64>, report: &mut RunReport) -> Result<(), CliError> {
    if let Some(count) = a.random {
        if a.sys.given() {
            return Err(usage("--random cannot be combined with an explicit system"));
        }
        if a.max_side < 2 {
            return Err(usage("--max-side must be at least 2"));
        }
        let seed = need_seed(seed, "random sweeps")?;
        let parts: Vec<Vec<Row>> = (0..count)
            .into_par_iter()
            .map(|i| {
                let (sys, e, h) = random_covering_torus(case_seed(seed, i), a.max_side);
                let rep = epodur_sweep(&sys, &e, h);
                let params = format!("case={i};sizes={:?};E={:?}", sys.to_descriptor().sizes.unwrap_or_default(), e.to_vec());
                let mut rows = Vec::new();
                report_rows(&rep, &params, &mut rows);
                rows
            })
            .collect();
        report.rows = parts.into_iter().flatten().collect();
        return Ok(());
    }
    let sys = a.sys.system()?;
    let e = a.sys.set(sys.len())?;
    let h = a.horizon.ok_or_else(|| usage("--horizon is required"))?;
    let rep = match &a.z {
        Some(z) => {
            let z = parse_element(z, sys.dim(), "--z")?;
            check_epodur(&sys, &e, &z, h).map_err(module("poset"))?
        }
        None => epodur_sweep(&sys, &e, h),
    };
    report_rows(&rep, "", &mut report.rows);
    Ok(())
}

// ---------------------------------------------------------------- torus-demo

#[derive(Args, Debug)]
pub struct TorusDemoArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
}

pub fn torus_demo(a: &TorusDemoArgs, report: &mut RunReport) -> Result<(), CliError> {
    if a.n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    let st = torus_triangle_stats(a.n);
    let params = format!("n={}", a.n);
    let scale = a.n as f64 / 6.0;
    let named = [
        ("avg|r.du.|", &st.return_duration),
        ("avg|r.du.(-)|", &st.return_duration_inv),
        ("avg|a.ep.|", &st.arrival_epoch),
        ("avg|a.ep.(-)|", &st.arrival_epoch_inv),
    ];
    for (name, v) in named {
        report.rows.push(Row::info(name, &params, pq_list([("exact", v)])));
    }
    let mut close = |name: &str, v: &Rational, target: f64| {
        let mut r = Row::close(format!("{name} vs {target:.4}"), &params, to_f64(v), target, 0.03);
        r.values = format!("exact={};tol=0.03", to_pq(v));
        report.rows.push(r);
    };
    close("avg|r.du.|", &st.return_duration, 1.5);
    close("avg|a.ep.(-)|", &st.arrival_epoch_inv, 2.0 / 3.0);
    for (name, v) in [("avg|r.du.(-)|", &st.return_duration_inv), ("avg|a.ep.|", &st.arrival_epoch)] {
        let ratio = to_f64(v) / scale;
        report.rows.push(Row {
            check: format!("{name} / (n/6)"),
            params: params.clone(),
            values: format!("exact={}", to_pq(v)),
            estimate: Some(ratio),
            stderr: None,
            target: "[0.9,1.1]".into(),
            verdict: Verdict::from_bool((0.9..=1.1).contains(&ratio)),
        });
    }
    report.rows.push(Row::exact(
        "avg|r.du.| = avg|a.ep.(-)|",
        &params,
        pq_list([("r.du.", &st.return_duration), ("a.ep.(-)", &st.arrival_epoch_inv)]),
        "equal",
        st.return_duration == st.arrival_epoch_inv,
    ));
    report.artifacts.push(serde_json::to_value(&st).map_err(module("io"))?);
    Ok(())
}

// ---------------------------------------------------------------- odometer

#[derive(Args, Debug)]
pub struct OdometerArgs {
    #[command(flatten)]
    pub sys: SystemArgs,
    /// Odometer depth `D`.
    #[arg(long)]
    pub depth: u32,
    /// Sample this many configurations instead of enumerating all of them.
    #[arg(long)]
    pub samples: Option<u64>,
}

pub fn odometer(a: &OdometerArgs, seed: Option<u64>, report: &mut RunReport) -> Result<(), CliError> {
    let sys = a.sys.system()?;
    let e = a.sys.set(sys.len())?;
    let d = sys.dim();
    let params = format!("d={d};N={};D={};E={:?}", sys.len(), a.depth, e.to_vec());
    let Some(samples) = a.samples else {
        let r = aw_kac_conditions(&sys, &e, a.depth).map_err(module("odometer"))?;
        let rows = &mut report.rows;
        rows.push(Row::exact("E[card S]", &params, pq_list([("value", &r.expect_card_s)]), "1", r.card_is_one()));
        rows.push(Row::exact(
            "coverage",
            &params,
            format!("failures={};configurations={}", r.coverage_failures, r.configurations),
            "0 failures",
            r.coverage_holds(),
        ));
        rows.push(Row::exact(
            "thickness",
            &params,
            format!("violations={}", r.thickness_violations),
            "0 violations",
            r.thickness_holds(),
        ));
        rows.push(Row::exact(
            "E[phi^d]",
            &params,
            pq_list([("value", &r.expect_phi_pow_d), ("bound", &r.moment_bound)]),
            format!("<= {}", to_pq(&r.moment_bound)),
            r.moment_holds(),
        ));
        rows.push(Row::info("max phi", &params, r.max_phi.to_string()));
        report.artifacts.push(serde_json::to_value(&r).map_err(module("io"))?);
        return Ok(());
    };
    let seed = need_seed(seed, "sampled odometer runs")?;
    aw_sample(&sys, &e, 0, &DyadicParameter::zero(a.depth, d)).map_err(module("odometer"))?;
    let draws = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut r = sample_rng(seed, i);
            let (omega, alpha) = random_configuration(&mut r, &sys, a.depth);
            aw_sample(&sys, &e, omega, &alpha)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(module("odometer"))?;
    let (mut card, mut phi, mut thin) = (Moments::default(), Moments::default(), 0u64);
    for s in &draws {
        card.push(s.card() as f64);
        phi.push((s.phi as f64).powi(d as i32));
        thin += u64::from(!s.is_thick());
    }
    let card = card.estimate(seed);
    report.rows.push(Row::mc("E[card S]", &params, &card, 1.0, 3.0));
    report.rows.push(Row::exact("thickness", &params, format!("violations={thin}"), "0 violations", thin == 0));
    let phi = phi.estimate(seed);
    let bound = (1u64 << d) as f64 * card.mean;
    report.rows.push(Row {
        check: "E[phi^d]".into(),
        params,
        values: format!("samples={samples}"),
        estimate: Some(phi.mean),
        stderr: Some(phi.stderr),
        target: format!("<= {bound}"),
        verdict: Verdict::from_bool(phi.mean <= bound + 3.0 * phi.stderr),
    });
    Ok(())
}

// ---------------------------------------------------------------- flows

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FlowOp {
    /// Closed-form enhanced return time for a rotation.
    Circle,
    /// Monte-Carlo window estimator for a rotation.
    Window,
    /// Helmberg functional, both variants, and its dyadic limit.
    Helmberg,
    /// Crossing rate of a segment by a linear flow on the 2-torus.
    Torus,
}

#[derive(Args, Debug)]
pub struct FlowsArgs {
    #[arg(long, value_enum)]
    pub op: FlowOp,
    /// Arc union `a1:b1,a2:b2,...` with rational endpoints.
    #[arg(long)]
    pub arcs: Option<String>,
    /// Window length `T` (rational for `window`, float for `torus`).
    #[arg(long)]
    pub t: Option<String>,
    /// Helmberg parameter `s` (half the smallest admissible threshold when absent).
    #[arg(long)]
    pub s: Option<String>,
    /// Largest dyadic exponent for the Helmberg limit.
    #[arg(long, default_value_t = 40)]
    pub j_max: u32,
    #[arg(long)]
    pub samples: Option<u64>,
    /// Flow velocity components.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Segment endpoints `x,y`.
    #[arg(long, allow_hyphen_values = true)]
    pub p0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub p1: Option<String>,
}

fn arcs_of(a: &FlowsArgs) -> Result<ArcUnion, CliError> {
    let s = a.arcs.as_deref().ok_or_else(|| usage("--arcs is required"))?;
    ArcUnion::parse(s).map_err(|e| usage(format!("--arcs: {e}")))
}

pub fn flows(a: &FlowsArgs, seed: Option<u64>, report: &mut RunReport) -> Result<(), CliError> {
    match a.op {
        FlowOp::Circle => {
            let e = arcs_of(a)?;
            let value = circle_enhanced_return(&e);
            let target = Rational::one() - e.measure();
            let params = format!("E={}", e.to_spec());
            report.rows.push(Row::exact(
                "circle.enhanced-return",
                &params,
                pq_list([("value", &value), ("measure", &e.measure())]),
                to_pq(&target),
                value == target,
            ));
        }
        FlowOp::Window => {
            let e = arcs_of(a)?;
            let t = parse_rat(a.t.as_deref().unwrap_or("1"), "--t")?;
            let seed = need_seed(seed, "Monte-Carlo runs")?;
            let est = circle_window_mc(&e, &t, a.samples.unwrap_or(10_000), seed).map_err(module("circle"))?;
            let target = Rational::one() - e.measure();
            let mut row = Row::mc("circle.window", format!("E={};T={}", e.to_spec(), to_pq(&t)), &est, to_f64(&target), 3.0);
            row.target = to_pq(&target);
            report.rows.push(row);
        }
        FlowOp::Helmberg => {
            let e = arcs_of(a)?;
            let k = int(e.len() as i64);
            let base = Rational::one() - e.measure();
            let min_gap = e.gaps().into_iter().min();
            let min_len = e.arcs().iter().map(|x| x.length.clone()).min();
            let threshold = match (min_gap, min_len) {
                (Some(g), Some(l)) => g.min(l),
                _ => return Err(module("circle")(CircleError::Invalid("E is empty".into()))),
            };
            let s = match &a.s {
                Some(s) => parse_rat(s, "--s")?,
                None => threshold / int(2),
            };
            let params = format!("E={};s={}", e.to_spec(), to_pq(&s));
            let trailing = helmberg_functional(&e, &s).map_err(module("circle"))?;
            let want = &base - &k * &s / int(2);
            report.rows.push(Row::exact(
                "helmberg.trailing",
                &params,
                pq_list([("value", &trailing)]),
                format!("(1-mu)-k*s/2={}", to_pq(&want)),
                trailing == want,
            ));
            let forward = helmberg_functional_forward(&e, &s).map_err(module("circle"))?;
            let want = &base + &k * &s / int(2);
            report.rows.push(Row::exact(
                "helmberg.forward",
                &params,
                pq_list([("value", &forward)]),
                format!("(1-mu)+k*s/2={}", to_pq(&want)),
                forward == want,
            ));
            let seq = helmberg_dyadic_sequence(&e, a.j_max);
            match seq.last() {
                Some((j, v)) => {
                    let mut r = Row::close("helmberg.dyadic-limit", format!("E={};j={j}", e.to_spec()), to_f64(v), to_f64(&base), 1e-9);
                    r.values = format!("value={};tol=1e-9", to_pq(v));
                    r.target = to_pq(&base);
                    report.rows.push(r);
                }
                None => report.rows.push(Row::exact("helmberg.dyadic-limit", e.to_spec(), "", "some admissible j", false)),
            }
        }
        FlowOp::Torus => {
            let (fa, fb) = (a.a.ok_or_else(|| usage("--a is required"))?, a.b.ok_or_else(|| usage("--b is required"))?);
            let p0 = parse_pair(a.p0.as_deref().ok_or_else(|| usage("--p0 is required"))?, "--p0")?;
            let p1 = parse_pair(a.p1.as_deref().ok_or_else(|| usage("--p1 is required"))?, "--p1")?;
            let t = match &a.t {
                Some(t) => t.parse::<f64>().map_err(|_| usage("--t is not a number"))?,
                None => 1.5,
            };
            let seed = need_seed(seed, "Monte-Carlo runs")?;
            let est = torus_flow_crossings(fa, fb, p0, p1, t, a.samples.unwrap_or(100_000), seed).map_err(module("circle"))?;
            let target = flow_crossing_rate(fa, fb, (p1.0 - p0.0, p1.1 - p0.1));
            let params = format!("a={fa};b={fb};p0={p0:?};p1={p1:?};T={t}");
            report.rows.push(Row::mc("torus.crossing-rate", params, &est, target, 3.0));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- renewal

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RenewalOp {
    /// Epochs in `[a, a + X_1)` under the Palm law; mean 1.
    T,
    /// Mean of `X_1` under the Palm law.
    K,
    /// Count in `[a, a + c)` against `c / E X_1`.
    Limit,
    /// Lattice renewal masses `u_n`: exact recursion, Monte Carlo and limit.
    Mass,
}

#[derive(Args, Debug)]
pub struct RenewalArgs {
    /// `exp:RATE`, `uniform:A:B`, `lattice:K1,K2:P1,P2` or JSON.
    #[arg(long)]
    pub dist: String,
    #[arg(long, value_enum)]
    pub op: RenewalOp,
    /// Window start(s), comma separated for `t`.
    #[arg(long, default_value = "0")]
    pub a: String,
    /// Window length for `limit`.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    /// Largest `n` for `mass`.
    #[arg(long, default_value_t = 50)]
    pub n_max: usize,
    /// Tolerance of the exact `u_{n_max}` against `1 / E X_1`.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

pub fn renewal(a: &RenewalArgs, seed: Option<u64>, report: &mut RunReport) -> Result<(), CliError> {
    let dist = parse_distribution(&a.dist)?;
    let seed = need_seed(seed, "renewal runs")?;
    let dname = serde_json::to_string(&dist).map_err(module("io"))?;
    let starts = parse_f64s(&a.a, "--a")?;
    let first = *starts.first().ok_or_else(|| usage("--a is empty"))?;
    match a.op {
        RenewalOp::T => {
            for (i, &start) in starts.iter().enumerate() {
                let est = check_rnwl_t(&dist, start, a.samples, case_seed(seed, i as u64)).map_err(module("renewal"))?;
                report.rows.push(Row::mc("renewal.t", format!("dist={dname};a={start}"), &est, 1.0, 3.0));
            }
        }
        RenewalOp::K => {
            let est = check_rnwl_k(&dist, a.samples, seed).map_err(module("renewal"))?;
            report.rows.push(Row::mc("renewal.k", format!("dist={dname}"), &est, dist.mean(), 3.0));
        }
        RenewalOp::Limit => {
            let (est, target) = renewal_limit(&dist, first, a.c, a.samples, seed).map_err(module("renewal"))?;
            report.rows.push(Row::mc("renewal.limit", format!("dist={dname};a={first};c={}", a.c), &est, target, 3.0));
        }
        RenewalOp::Mass => {
            let exact = renewal_mass_exact(&dist, a.n_max).map_err(module("renewal"))?;
            let mc = renewal_mass_mc(&dist, a.n_max, a.samples, seed).map_err(module("renewal"))?;
            for (n, (u, est)) in exact.iter().zip(&mc).enumerate() {
                let mut r = Row::mc(format!("renewal.u{n}"), format!("dist={dname}"), est, to_f64(u), 3.0);
                r.values = format!("exact={};samples={}", to_pq(u), est.samples);
                report.rows.push(r);
            }
            let mean = dist.exact_mean().ok_or_else(|| usage("mass needs a lattice law"))?;
            let limit = Rational::one() / mean;
            let last = &exact[a.n_max];
            let mut r = Row::close(
                format!("renewal.u{} vs 1/E X_1", a.n_max),
                format!("dist={dname}"),
                to_f64(last),
                to_f64(&limit),
                a.tol,
            );
            r.values = format!("exact={};tol={}", to_pq(last), a.tol);
            r.target = to_pq(&limit);
            report.rows.push(r);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- equidecomp

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EquiOp {
    /// Witness family or separating certificate for `f` and `g`.
    Decompose,
    /// Least `max g` over `g` equidecomposable with `f`.
    MinMax,
    /// Average norm of `v`.
    AverageNorm,
    /// Every operation whose inputs are present.
    All,
}

#[derive(Args, Debug)]
pub struct EquidecompArgs {
    #[arg(long)]
    pub system: String,
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub g: Option<String>,
    /// Vector for the average norm (defaults to `f`).
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<String>,
    /// Window `x1;x2;...` with each element `a,b,...` (group representatives when absent).
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    #[arg(long, value_enum, default_value = "all")]
    pub op: EquiOp,
}

fn vec_row(check: &str, v: &[Rational]) -> String {
    format!("{check}=[{}]", v.iter().map(to_pq).collect::<Vec<_>>().join(","))
}

pub fn equidecomp(a: &EquidecompArgs, report: &mut RunReport) -> Result<(), CliError> {
    let sys: FiniteSystem = load_system(&a.system)?;
    let n = sys.len();
    let f = a.f.as_deref().map(|s| parse_rationals(s, n, "--f")).transpose()?;
    let g = a.g.as_deref().map(|s| parse_rationals(s, n, "--g")).transpose()?;
    let v = match &a.v {
        Some(s) => Some(parse_rationals(s, n, "--v")?),
        None => f.clone(),
    };
    let window = a
        .window
        .as_deref()
        .map(|w| parse_window(w, sys.dim()).map_err(|e| usage(format!("--window: {e}"))))
        .transpose()?;
    let win = window.as_deref();
    let wants = |op: EquiOp| a.op == op || a.op == EquiOp::All;
    let mut ran = false;
    if wants(EquiOp::Decompose) && (a.op == EquiOp::Decompose || g.is_some()) {
        let f = f.as_ref().ok_or_else(|| usage("--f is required"))?;
        let g = g.as_ref().ok_or_else(|| usage("--g is required"))?;
        let dec = find_equidecomposition(&sys, f, g, win).map_err(module("equidecomp"))?;
        let (kind, ok) = match &dec {
            Decomposition::Witness(w) => ("witness", w.verify(&sys, f, g)),
            Decomposition::Certificate(c) => ("certificate", c.verify(&sys, f, g)),
        };
        let params = format!("{};{}", vec_row("f", f), vec_row("g", g));
        report.rows.push(Row::exact("equidecomp.verdict", params, format!("verdict={kind}"), "verified", ok));
        report.artifacts.push(serde_json::to_value(&dec).map_err(module("io"))?);
        ran = true;
    }
    if wants(EquiOp::MinMax) && (a.op == EquiOp::MinMax || f.is_some()) {
        let f = f.as_ref().ok_or_else(|| usage("--f is required"))?;
        let m = min_equi_max(&sys, f, win).map_err(module("equidecomp"))?;
        let sup = sup_invariant_integral(&sys, f);
        report.rows.push(Row::exact(
            "equidecomp.min-max",
            vec_row("f", f),
            pq_list([("value", &m.value)]),
            format!("sup invariant integral={}", to_pq(&sup)),
            m.value == sup,
        ));
        report.artifacts.push(serde_json::to_value(&m).map_err(module("io"))?);
        ran = true;
    }
    if wants(EquiOp::AverageNorm) && (a.op == EquiOp::AverageNorm || v.is_some()) {
        let v = v.as_ref().ok_or_else(|| usage("--v or --f is required"))?;
        let r = average_norm_a(&sys, v, win).map_err(module("equidecomp"))?;
        let best = orbit_averages(&sys, v).into_iter().max().unwrap_or_else(Rational::zero);
        report.rows.push(Row::exact(
            "equidecomp.average-norm",
            vec_row("v", v),
            pq_list([("value", &r.value)]),
            format!("max orbit average={}", to_pq(&best)),
            r.value == best,
        ));
        report.artifacts.push(serde_json::to_value(&r).map_err(module("io"))?);
        ran = true;
    }
    if !ran {
        return Err(usage("nothing to do: give --f (and --g for a decomposition)"));
    }
    Ok(())
}
