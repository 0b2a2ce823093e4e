//! One function per subcommand. Each returns the files it produced and a
//! short human summary; `main` decides where they go.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use robust_amput::hedging::{
    corner_pairs, duality_gap, hedge_cost, superhedge_for, superhedge_from_psi, verify_pathwise_with, ConvexPayoff,
    Superhedge, ViolationReport,
};
use robust_amput::leftcurtain::{to_transport_plan, LeftCurtainMap, PlanResiduals, TransportPlan};
use robust_amput::measures::{check_convex_order, Measure, MeasureSpec, Verdict};
use robust_amput::oracle::{build_lp, discretize_for_oracle, solve_lp, LpSolution, LpStatus};
use robust_amput::pricing::{evaluate_under_plan, price, PricingSolution, StrikePair};
use robust_amput::simulate::{bucket_drift, sample_pairs, simulate};
use robust_amput::Exec;
use serde_json::{json, Value};

use crate::config::{Laws, RunConfig, Strike};
use crate::error::CliError;

/// Oracle size used by `verify` when `--grid` is absent.
const ORACLE_GRID: (usize, usize) = (100, 200);
/// Largest tolerated `|LP − price|` on the oracle grid.
const ORACLE_GAP: f64 = 5e-3;
const SANDWICH_SLACK: f64 = -1e-9;
const PLAN_RESIDUAL: f64 = 1e-10;
const REGION_GRID: usize = 50;

pub struct Output {
    /// `(file name, contents)`; the first file is the main output.
    pub files: Vec<(&'static str, String)>,
    pub summary: String,
    /// The command finished its report but a check failed.
    pub failure: Option<CliError>,
}

impl Output {
    fn new(files: Vec<(&'static str, String)>, summary: String) -> Self {
        Output { files, summary, failure: None }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.7}"))
}

fn ensure_convex_order(mu: &Measure, nu: &Measure) -> Result<(), CliError> {
    match check_convex_order(mu, nu).into_error() {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

/// Laws in convex order, plus the map when `μ` is atomless.
fn load(cfg: &RunConfig) -> Result<Laws, CliError> {
    let laws = cfg.laws()?;
    ensure_convex_order(&laws.mu, &laws.nu)?;
    Ok(laws)
}

fn load_map(cfg: &RunConfig) -> Result<(Laws, LeftCurtainMap), CliError> {
    let laws = load(cfg)?;
    if laws.discrete {
        return Err(CliError::Input(
            "μ has atoms on a coarse grid, so the threshold rule is not optimal; \
             `verify` and `coupling` accept such laws"
                .into(),
        ));
    }
    let map = LeftCurtainMap::build(&laws.mu, &laws.nu)?;
    Ok((laws, map))
}

fn strike_pair(cfg: &RunConfig) -> Result<StrikePair, CliError> {
    let (k1, k2) = cfg.strikes()?;
    Ok(StrikePair::new(k1, k2))
}

fn solution_summary(sol: &PricingSolution, k: StrikePair) -> String {
    let mut s = format!("K1 = {}, K2 = {}\nregion {}\nprice {:.10}\n", k.k1, k.k2, sol.region, sol.price);
    let _ = writeln!(
        s,
        "critical (f*, x*, g*) = ({}, {}, {})",
        fmt_opt(sol.f_star),
        fmt_opt(sol.x_star),
        fmt_opt(sol.g_star)
    );
    let _ = writeln!(s, "exercise at the first date iff X < {:.7}", sol.threshold);
    if sol.diagnostics.near_accumulation {
        s.push_str("note: K1 sits next to a regeneration point; W and B are hard to separate there\n");
    }
    s
}

pub fn price_cmd(cfg: &RunConfig) -> Result<Output, CliError> {
    let k = strike_pair(cfg)?;
    let (laws, map) = load_map(cfg)?;
    let sol = price(&map, k)?;
    let mut doc = serde_json::to_value(&sol).map_err(|e| CliError::Numerical(e.to_string()))?;
    doc["strikes"] = json!(k);
    doc["smoothing"] = json!(laws.smoothed);
    Ok(Output::new(vec![("price.json", pretty(&doc))], solution_summary(&sol, k)))
}

/// `φ`, `θ1` and `ψ` on the union of both grids.
fn hedge_table(h: &Superhedge, mu: &Measure, nu: &Measure) -> String {
    let mut xs: Vec<f64> = mu.points().iter().chain(nu.points()).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut out = String::from("point,phi,theta1,psi\n");
    for x in xs {
        let _ = writeln!(out, "{x},{},{},{}", h.phi(x), h.theta1(x), h.psi.eval(x));
    }
    out
}

pub fn hedge_cmd(cfg: &RunConfig) -> Result<Output, CliError> {
    let k = strike_pair(cfg)?;
    let (laws, map) = load_map(cfg)?;
    let sol = price(&map, k)?;
    let h = superhedge_for(&sol, &map, k)?;
    let gap = duality_gap(&sol, &h, &laws.mu, &laws.nu);
    let mut doc = h.to_json();
    doc["strikes"] = json!(k);
    doc["region"] = json!(sol.region);
    doc["price"] = json!(sol.price);
    doc["duality_gap"] = json!(gap);
    let mut summary = format!("region {}, price {:.10}\n", sol.region, sol.price);
    let _ = writeln!(summary, "psi = {}", describe_psi(&h.psi));
    let _ = writeln!(summary, "hedge cost {:.10}, duality gap {gap:.3e}", h.cost.unwrap_or(f64::NAN));
    Ok(Output::new(
        vec![("hedge.json", pretty(&doc)), ("hedge_table.csv", hedge_table(&h, &laws.mu, &laws.nu))],
        summary,
    ))
}

fn describe_psi(psi: &ConvexPayoff) -> String {
    let legs: Vec<String> = psi.puts.iter().map(|l| format!("{:.6}·(K − y)⁺ at K = {:.6}", l.weight, l.strike)).collect();
    if legs.is_empty() {
        "0".into()
    } else {
        legs.join(" + ")
    }
}

fn plan_json(plan: &TransportPlan) -> Value {
    json!({
        "rows": plan.rows.len(),
        "cols": plan.cols.len(),
        "entries": plan.entries.len(),
        "residuals": plan.residuals(),
    })
}

fn residual_ok(r: &PlanResiduals) -> bool {
    r.row_mass <= PLAN_RESIDUAL && r.col_mass <= PLAN_RESIDUAL && r.martingale <= PLAN_RESIDUAL
}

pub fn coupling_cmd(cfg: &RunConfig) -> Result<Output, CliError> {
    let laws = load(cfg)?;
    if laws.discrete {
        let plan = TransportPlan::left_curtain(&laws.mu, &laws.nu)?;
        let doc = json!({ "discrete": true, "plan": plan_json(&plan) });
        let r = plan.residuals();
        let summary = format!(
            "discrete left-curtain plan: {} entries, martingale residual {:.1e}\n",
            plan.entries.len(),
            r.martingale
        );
        return Ok(Output::new(vec![("coupling.json", pretty(&doc)), ("plan.csv", plan.to_csv())], summary));
    }
    let map = LeftCurtainMap::build(&laws.mu, &laws.nu)?;
    let plan = to_transport_plan(&map)?;
    let side = map.sidecar();
    let mut summary = format!(
        "{} samples, {} f-jumps, {} g-jumps, {} diagonal segments, {} regeneration pairs\n",
        map.samples().len(),
        side.f_jumps.len(),
        side.g_jumps.len(),
        side.diagonal_segments.len(),
        side.regeneration_pairs.len()
    );
    let _ = writeln!(summary, "monotonicity {}", if side.monotonicity.is_clean() { "clean" } else { "VIOLATED" });
    let _ = writeln!(summary, "plan: {} entries, martingale residual {:.1e}", plan.entries.len(), plan.residuals().martingale);
    let doc = json!({
        "discrete": false,
        "smoothing": laws.smoothed,
        "map": side,
        "plan": plan_json(&plan),
    });
    Ok(Output::new(
        vec![("coupling.json", pretty(&doc)), ("map.csv", map.to_csv()), ("plan.csv", plan.to_csv())],
        summary,
    ))
}

/// Cell centres of `n` equal cells over `[lo, hi]`, or the single strike.
fn axis(strike: Option<Strike>, n: usize, (lo, hi): (f64, f64)) -> Vec<f64> {
    match strike {
        Some(Strike::At(v)) => vec![v],
        Some(Strike::Range(a, b)) => cells(a, b, n),
        None => cells(lo, hi, n),
    }
}

fn cells(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (i as f64 + 0.5) * (hi - lo) / n as f64).collect()
}

pub fn region_map_cmd(cfg: &RunConfig) -> Result<Output, CliError> {
    let (_, map) = load_map(cfg)?;
    let (n1, n2) = cfg.grid.unwrap_or((REGION_GRID, REGION_GRID));
    let support = map.solver().nu_support();
    let k1s = axis(cfg.k1, n1, support);
    let k2s = axis(cfg.k2, n2, support);
    let rows = Exec::default().try_map(k1s.len(), |i| {
        let k1 = k1s[i];
        k2s.iter()
            .filter(|&&k2| k2 < k1)
            .map(|&k2| price(&map, StrikePair::new(k1, k2)).map(|s| (k1, k2, s.region, s.price)))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut csv = String::from("k1,k2,region,price\n");
    let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for (k1, k2, region, p) in rows.into_iter().flatten() {
        let _ = writeln!(csv, "{k1},{k2},{region},{p}");
        *counts.entry(region.as_str()).or_default() += 1;
    }
    let total: usize = counts.values().sum();
    let mut summary = format!("{total} cells with K2 < K1\n");
    for (label, n) in &counts {
        let _ = writeln!(summary, "  {label:<14} {n}");
    }
    Ok(Output::new(vec![("region_map.csv", csv)], summary))
}

struct Gate {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn gates_json(gates: &[Gate]) -> Value {
    Value::Array(gates.iter().map(|g| json!({ "name": g.name, "pass": g.pass, "detail": g.detail })).collect())
}

fn gate_summary(gates: &[Gate]) -> (String, Option<CliError>) {
    let mut s = String::new();
    for g in gates {
        let _ = writeln!(s, "  {} {:<12} {}", if g.pass { "PASS" } else { "FAIL" }, g.name, g.detail);
    }
    let failed: Vec<&str> = gates.iter().filter(|g| !g.pass).map(|g| g.name).collect();
    let failure = (!failed.is_empty()).then(|| CliError::Gate(format!("gates failed: {}", failed.join(", "))));
    (s, failure)
}

fn lp_gate(lp: &LpSolution) -> Result<(), CliError> {
    if lp.status == LpStatus::Optimal {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("oracle LP ended {:?}", lp.status)))
    }
}

fn pathwise_gate(report: &ViolationReport) -> Gate {
    Gate {
        name: "pathwise",
        pass: report.violations == 0,
        detail: format!("{} violations over {} pairs, worst margin {:.3e}", report.violations, report.checked, report.worst_margin),
    }
}

/// Evenly spaced points over the support of `m`.
fn spread(m: &Measure, n: usize) -> Vec<f64> {
    let (lo, hi) = m.support().unwrap_or((0.0, 0.0));
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

pub fn verify_cmd(cfg: &RunConfig) -> Result<Output, CliError> {
    let k = strike_pair(cfg)?;
    let laws = load(cfg)?;
    if laws.discrete {
        return verify_discrete(cfg, &laws, k);
    }
    let exec = Exec::default();
    let map = LeftCurtainMap::build(&laws.mu, &laws.nu)?;
    let sol = price(&map, k)?;
    let h = superhedge_for(&sol, &map, k)?;
    let hc = h.cost.unwrap_or_else(|| hedge_cost(&h, &laws.mu, &laws.nu));
    let mbep = sol.price;

    let (n, m) = cfg.grid.unwrap_or(ORACLE_GRID);
    let (mu_d, nu_d) = discretize_for_oracle(map.mu(), map.nu(), n, m)?;
    let plan_d = TransportPlan::left_curtain(&mu_d, &nu_d)?;
    let lp_problem = build_lp(&mu_d, &nu_d, k)?;
    let lp = solve_lp(&lp_problem)?;
    lp_gate(&lp)?;
    let plan_value = evaluate_under_plan(&plan_d, sol.threshold, k);
    let hc_d = hedge_cost(&h, &mu_d, &nu_d);
    let slack = (lp.value - plan_value).min(hc_d - lp.value);

    let plan = to_transport_plan(&map)?;
    let pairs = sample_pairs(&plan, cfg.samples, cfg.seed, exec)?;
    let sampled = verify_pathwise_with(&h, &pairs, exec);
    let grid = verify_pathwise_with(&h, &corner_pairs(&h, &spread(&laws.mu, 200), &spread(&laws.nu, 200)), exec);
    let pathwise = sampled.clone().merge(grid);
    let mono = map.monotonicity();
    let residuals = plan.residuals();

    let gates = vec![
        Gate {
            name: "duality",
            pass: (mbep - hc).abs() <= cfg.tol * mbep.abs().max(1.0),
            detail: format!("|MBEP − HC| = {:.3e} (tol {:.1e})", (mbep - hc).abs(), cfg.tol),
        },
        Gate {
            name: "sandwich",
            pass: slack >= SANDWICH_SLACK,
            detail: format!("plan {plan_value:.8} ≤ LP {:.8} ≤ hedge {hc_d:.8}, slack {slack:.3e}", lp.value),
        },
        Gate {
            name: "oracle",
            pass: (lp.value - mbep).abs() <= ORACLE_GAP,
            detail: format!("|LP − MBEP| = {:.3e} at {n}×{m}", (lp.value - mbep).abs()),
        },
        pathwise_gate(&pathwise),
        Gate {
            name: "monotonicity",
            pass: mono.is_clean(),
            detail: format!("{} samples checked", mono.samples),
        },
        Gate {
            name: "plan",
            pass: residual_ok(&residuals),
            detail: format!("martingale residual {:.1e}", residuals.martingale),
        },
    ];
    let (gate_text, failure) = gate_summary(&gates);
    let doc = json!({
        "mode": "continuous",
        "strikes": k,
        "smoothing": laws.smoothed,
        "region": sol.region,
        "mbep": mbep,
        "hc": hc,
        "lp": lp.value,
        "oracle_grid": [n, m],
        "sandwich": { "plan_value": plan_value, "lp_value": lp.value, "hedge_cost": hc_d, "slack": slack },
        "gaps": { "mbep_hc": (mbep - hc).abs(), "lp_mbep": (lp.value - mbep).abs() },
        "pathwise": { "samples": cfg.samples, "seed": cfg.seed, "sampled": sampled.violations, "report": pathwise },
        "invariants": { "monotonicity": mono, "plan_residuals": residuals },
        "lp_iterations": lp.iterations,
        "gates": gates_json(&gates),
        "pass": failure.is_none(),
    });
    let summary = format!(
        "region {}\nMBEP {mbep:.10}\nHC   {hc:.10}\nLP   {:.10} ({n}×{m})\n{gate_text}",
        sol.region, lp.value
    );
    let mut files = vec![("verify.json", pretty(&doc)), ("lp.txt", lp_problem.to_lp_text()), ("lp_solution.csv", lp.to_csv())];
    if pathwise.violations > 0 {
        files.push(("violations.csv", pathwise.to_csv()));
    }
    Ok(Output { files, summary, failure })
}

/// Atomic `μ`: no threshold rule, so the LP is checked against the hedge
/// generated by a single put at `K2`, which always superhedges.
fn verify_discrete(cfg: &RunConfig, laws: &Laws, k: StrikePair) -> Result<Output, CliError> {
    let lp_problem = build_lp(&laws.mu, &laws.nu, k)?;
    let lp = solve_lp(&lp_problem)?;
    lp_gate(&lp)?;
    let h = superhedge_from_psi(ConvexPayoff::from_puts(&[(k.k2, 1.0)]), k, &laws.mu)?;
    let hc = hedge_cost(&h, &laws.mu, &laws.nu);
    let pathwise = verify_pathwise_with(&h, &corner_pairs(&h, laws.mu.points(), laws.nu.points()), Exec::default());
    let plan = TransportPlan::left_curtain(&laws.mu, &laws.nu)?;
    let residuals = plan.residuals();
    let gates = vec![
        Gate {
            name: "weak-duality",
            pass: lp.value <= hc + cfg.tol * hc.abs().max(1.0),
            detail: format!("LP {:.10} ≤ HC {hc:.10}", lp.value),
        },
        pathwise_gate(&pathwise),
        Gate {
            name: "plan",
            pass: residual_ok(&residuals),
            detail: format!("martingale residual {:.1e}", residuals.martingale),
        },
    ];
    let (gate_text, failure) = gate_summary(&gates);
    let doc = json!({
        "mode": "discrete",
        "strikes": k,
        "mbep": Value::Null,
        "hc": hc,
        "lp": lp.value,
        "gaps": { "hc_lp": hc - lp.value },
        "pathwise": pathwise,
        "invariants": { "plan_residuals": residuals },
        "lp_iterations": lp.iterations,
        "gates": gates_json(&gates),
        "pass": failure.is_none(),
    });
    let summary = format!(
        "discrete μ: the LP value may exceed any threshold-rule value\nLP {:.10}\nHC {hc:.10} (single put at K2)\n{gate_text}",
        lp.value
    );
    Ok(Output {
        files: vec![("verify.json", pretty(&doc)), ("lp.txt", lp_problem.to_lp_text()), ("lp_solution.csv", lp.to_csv())],
        summary,
        failure,
    })
}

pub fn simulate_cmd(cfg: &RunConfig) -> Result<Output, CliError> {
    let k = strike_pair(cfg)?;
    let (_, map) = load_map(cfg)?;
    let sol = price(&map, k)?;
    let h = superhedge_for(&sol, &map, k)?;
    let plan = to_transport_plan(&map)?;
    let rep = simulate(&plan, &h, sol.threshold, cfg.samples, cfg.seed, Exec::default())?;
    let within = rep.consistent_with(sol.price, 3.0);
    let pairs: Vec<(f64, f64)> = rep.samples.iter().map(|s| (s.x, s.y)).collect();
    let drift: Vec<Value> = bucket_drift(&pairs, 20)
        .into_iter()
        .map(|(x, d, se)| json!({ "x_mean": x, "drift": d, "std_error": se }))
        .collect();
    let doc = json!({
        "samples": rep.samples.len(),
        "seed": cfg.seed,
        "price": sol.price,
        "mean_payoff": rep.mean_payoff,
        "std_error": rep.std_error,
        "within_3se": within,
        "violations": rep.violations,
        "martingale_buckets": drift,
    });
    let summary = format!(
        "{} paths, seed {}\nmean payoff {:.7} ± {:.2e} against price {:.7} ({})\nsuperhedge violations {}\n",
        rep.samples.len(),
        cfg.seed,
        rep.mean_payoff,
        rep.std_error,
        sol.price,
        if within { "within 3 s.e." } else { "OUTSIDE 3 s.e." },
        rep.violations.violations
    );
    Ok(Output::new(vec![("simulate.csv", rep.to_csv()), ("simulate.json", pretty(&doc))], summary))
}

fn verdict_json(v: &Verdict) -> Value {
    match *v {
        Verdict::Holds { min_d } => json!({ "holds": true, "min_d": min_d }),
        Verdict::Mismatch { mass_mu, mass_nu, bar_mu, bar_nu } => json!({
            "holds": false, "mass_mu": mass_mu, "mass_nu": mass_nu, "bar_mu": bar_mu, "bar_nu": bar_nu,
        }),
        Verdict::FailsAt { k, d } => json!({ "holds": false, "k": k, "d": d }),
    }
}

fn law_summary(name: &str, m: &Measure) -> String {
    let (lo, hi) = m.support().unwrap_or((f64::NAN, f64::NAN));
    format!(
        "{name}: {:?} on [{lo:.6}, {hi:.6}], {} points, mass {:.6}, mean {:.6}\n",
        m.kind(),
        m.len(),
        m.mass(),
        m.barycentre().unwrap_or(f64::NAN)
    )
}

pub fn ingest_cmd(cfg: &RunConfig) -> Result<Output, CliError> {
    let (mu, nu) = cfg.raw_laws()?;
    let verdict = check_convex_order(&mu, &nu);
    let doc = json!({
        "mu": MeasureSpec::from_measure(&mu),
        "nu": MeasureSpec::from_measure(&nu),
        "convex_order": verdict_json(&verdict),
    });
    let mut summary = law_summary("mu", &mu) + &law_summary("nu", &nu);
    summary.push_str(if verdict.holds() { "convex order holds\n" } else { "convex order FAILS\n" });
    let failure = verdict.into_error().map(CliError::from);
    Ok(Output { files: vec![("measures.json", pretty(&doc))], summary, failure })
}
