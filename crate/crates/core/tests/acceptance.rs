//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Every comparison is exact; the only
//! tolerances are the wall-clock limits below.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wtardy::dp::{cell_bound, dp_solve, enumerate_profiles, profile_bound, solve_dp, DpConfig};
use wtardy::milp::{
    lp_format, rat, solve_milp_with, LpOptions, MilpModel, MilpOptions, MilpStatus, Rational, Relation, VarId,
};
use wtardy::model::{objective, reverse_instance, stats, validate};
use wtardy::oracle::solve_exact;
use wtardy::prd::{build_prd_model, integer_bound, solve_prd};
use wtardy::pwd::{schedule_single_due_date, solve_pwd_with, solve_pwr_with, PwdOptions, Rounding};
use wtardy::reductions::{bin_packing_feasible, from_bin_packing, random_instance, BinPackingInstance, RandomSpec};
use wtardy::{Instance, Job, Schedule};

const DP_LIMIT: Duration = Duration::from_secs(60);
const PRD_LIMIT: Duration = Duration::from_secs(600);
/// Pivots allowed per LP in criterion 8; a cycling simplex would hit it.
const PIVOT_LIMIT: u64 = 2_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(failures: &[String], summary: String) -> Outcome {
    match failures.first() {
        None => Outcome { pass: true, detail: summary },
        Some(first) => {
            Outcome { pass: false, detail: format!("{summary}; {} failures, first: {first}", failures.len()) }
        }
    }
}

/// Random instance with every distinct count drawn from `1..=cap` (and at most `n`).
fn shaped(rng: &mut ChaCha8Rng, caps: [usize; 4], max_p: u64, horizon: u64) -> Instance {
    let n = rng.gen_range(2..=7);
    let mut pick = |cap: usize| rng.gen_range(1..=cap.min(n));
    let spec = RandomSpec {
        n,
        distinct_p: pick(caps[0].min(max_p as usize)),
        distinct_w: pick(caps[1]),
        distinct_r: pick(caps[2]),
        distinct_d: pick(caps[3]),
        max_p,
        horizon,
    };
    random_instance(rng.gen(), &spec).expect("spec fits")
}

fn check_schedule(inst: &Instance, sched: &Schedule, weight: u64) -> Result<(), String> {
    let report = validate(inst, sched);
    if !report.is_valid() {
        return Err(format!("invalid schedule: {:?}", report.violations));
    }
    let got = objective(inst, sched).map_err(|e| e.to_string())?;
    if got != weight {
        return Err(format!("schedule weight {got} but reported {weight}"));
    }
    Ok(())
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut failures = Vec::new();
    for i in 0..200 {
        let inst = shaped(&mut rng, [7, 7, 3, 7], 5, 25);
        let want = solve_exact(&inst).unwrap().best_weight;
        match solve_dp(&inst) {
            Ok(res) if res.best_weight == want => {
                if let Err(e) = check_schedule(&inst, &res.schedule, want) {
                    failures.push(format!("#{i}: {e}"));
                }
            }
            Ok(res) => failures.push(format!("#{i}: dp {} oracle {want}", res.best_weight)),
            Err(e) => failures.push(format!("#{i}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= DP_LIMIT {
        failures.push(format!("took {elapsed:.1?}"));
    }
    outcome(&failures, format!("dp = oracle on 200 instances in {elapsed:.1?} (limit {DP_LIMIT:?})"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let mut failures = Vec::new();
    for i in 0..150 {
        let inst = shaped(&mut rng, [2, 7, 2, 2], 5, 16);
        let want = solve_exact(&inst).unwrap().best_weight;
        match solve_prd(&inst) {
            Ok(res) if res.best_weight == want => {
                if let Err(e) = check_schedule(&inst, &res.schedule, want) {
                    failures.push(format!("#{i}: {e}"));
                }
            }
            Ok(res) => failures.push(format!("#{i}: milp-prd {} oracle {want}", res.best_weight)),
            Err(e) => failures.push(format!("#{i}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= PRD_LIMIT {
        failures.push(format!("took {elapsed:.1?}"));
    }
    outcome(&failures, format!("milp-prd = oracle on 150 instances in {elapsed:.1?} (limit {PRD_LIMIT:?})"))
}

/// Also returns every rounding seen, for criterion 7.
fn criterion_3() -> (Outcome, Vec<Rounding>) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = PwdOptions { keep_roundings: true, ..PwdOptions::default() };
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut roundings = Vec::new();
    for i in 0..150 {
        let inst = shaped(&mut rng, [2, 2, 2, 2], 5, 16);
        let want = solve_exact(&inst).unwrap().best_weight;
        for (name, run) in [("milp-pwd", solve_pwd_with(&inst, &opts)), ("milp-pwr", solve_pwr_with(&inst, &opts))] {
            match run {
                Ok(run) => {
                    if run.result.best_weight != want {
                        failures.push(format!("#{i}: {name} {} oracle {want}", run.result.best_weight));
                    } else if let Err(e) = check_schedule(&inst, &run.result.schedule, want) {
                        failures.push(format!("#{i} {name}: {e}"));
                    }
                    roundings.extend(run.roundings);
                }
                Err(e) => failures.push(format!("#{i} {name}: {e}")),
            }
        }
    }
    let elapsed = start.elapsed();
    let summary = format!("milp-pwd = milp-pwr = oracle on 150 instances in {elapsed:.1?}");
    (outcome(&failures, summary), roundings)
}

/// Multisets of `k` sizes from `1..=cap`, non-increasing.
fn multisets(k: usize, cap: u64, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if prefix.len() == k {
        out.push(prefix.clone());
        return;
    }
    let top = prefix.last().copied().unwrap_or(cap);
    for s in 1..=top {
        prefix.push(s);
        multisets(k, cap, prefix, out);
        prefix.pop();
    }
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let (mut inputs, mut feasible) = (0, 0);
    for cap in 1..=6 {
        for bins in 1..=3 {
            for k in 1..=6 {
                let mut all = Vec::new();
                multisets(k, cap, &mut Vec::new(), &mut all);
                for sizes in all {
                    let bp = BinPackingInstance::new(sizes, bins, cap).unwrap();
                    let inst = from_bin_packing(&bp).unwrap();
                    let all_early = solve_exact(&inst).unwrap().best_weight == inst.n() as u64;
                    let fits = bin_packing_feasible(&bp);
                    inputs += 1;
                    feasible += usize::from(fits);
                    if all_early != fits {
                        failures.push(format!("{bp:?}: all early {all_early}, packable {fits}"));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        &failures,
        format!("{inputs} bin-packing inputs ({feasible} packable), zero disagreements allowed, {elapsed:.1?}"),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    for i in 0..200 {
        let raw = shaped(&mut rng, [7, 7, 7, 7], 5, 20);
        let r_min = raw.r_min();
        // keep releases at or before the last due date so reversal is defined
        let d_max = raw.d_max();
        let inst =
            Instance::new(raw.jobs().iter().map(|j| Job { r: (j.r - r_min).min(d_max), ..*j }).collect()).unwrap();
        if inst.r_min() != 0 {
            failures.push(format!("#{i}: generator left min r = {}", inst.r_min()));
            continue;
        }
        let rev = reverse_instance(&inst).unwrap();
        let (a, b) = (solve_exact(&inst).unwrap().best_weight, solve_exact(&rev).unwrap().best_weight);
        if a != b {
            failures.push(format!("#{i}: optimum {a}, reversed {b}"));
        }
        if reverse_instance(&rev).unwrap() != inst {
            failures.push(format!("#{i}: reversing twice changed the instance"));
        }
    }
    outcome(&failures, "equal optima and reverse twice = identity on 200 instances".into())
}

/// The feasibility condition for one common due date: for every release
/// date `r`, the jobs released at or after `r` fit in `[r, end]`.
fn fits_before(jobs: &[Job], end: u64) -> bool {
    jobs.iter().all(|a| {
        let load: u64 = jobs.iter().filter(|b| b.r >= a.r).map(|b| b.p).sum();
        a.r + load <= end
    })
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();
    let mut successes = 0;
    for i in 0..500 {
        let end = rng.gen_range(1..=20);
        let k = rng.gen_range(1..=6);
        let jobs: Vec<Job> =
            (0..k).map(|_| Job::new(rng.gen_range(1..=5), rng.gen_range(0..=end), end, rng.gen_range(1..=5))).collect();
        let inst = Instance::new(jobs.clone()).unwrap();
        let expected = fits_before(&jobs, end);
        let all_early = solve_exact(&inst).unwrap().best_weight == inst.total_weight();
        if expected != all_early {
            failures.push(format!("#{i}: condition {expected} but oracle all-early {all_early}"));
        }
        let ids: Vec<usize> = (0..k).collect();
        match schedule_single_due_date(&inst, &ids, end) {
            Ok(starts) if expected => {
                successes += 1;
                let sched = Schedule::from_starts({
                    let mut s = starts;
                    s.sort_unstable();
                    s.into_iter().map(|(_, t)| t)
                });
                let report = validate(&inst, &sched);
                if !report.is_valid() {
                    failures.push(format!("#{i}: invalid output {:?}", report.violations));
                } else if sched.early_jobs(&inst).count() != k {
                    failures.push(format!("#{i}: output has tardy jobs"));
                }
            }
            Ok(_) => failures.push(format!("#{i}: succeeded without the condition")),
            Err(_) if expected => failures.push(format!("#{i}: failed although the condition holds")),
            Err(_) => {}
        }
    }
    outcome(&failures, format!("scheduler succeeds iff the load condition holds on 500 sets ({successes} feasible)"))
}

fn criterion_7(roundings: &[Rounding]) -> Outcome {
    let mut failures = Vec::new();
    let mut moved = 0;
    for (i, r) in roundings.iter().enumerate() {
        if let Err(e) = r.model.check(&r.solution, false) {
            failures.push(format!("#{i}: input not feasible: {e}"));
            continue;
        }
        if r.solution != r.rounded {
            moved += 1;
        }
        let (before, after) = (r.model.objective_value(&r.solution), r.model.objective_value(&r.rounded));
        if before != after {
            failures.push(format!("#{i}: objective {before} became {after}"));
        }
        if let Err(e) = r.model.check(&r.rounded, true) {
            failures.push(format!("#{i}: {e}"));
        }
    }
    if roundings.is_empty() {
        failures.push("no solutions were recorded".into());
    }
    outcome(
        &failures,
        format!("{} model optima rounded ({moved} changed), objective kept and all rows re-verified", roundings.len()),
    )
}

fn random_model(rng: &mut ChaCha8Rng) -> (MilpModel, Vec<(i64, i64)>) {
    let mut m = MilpModel::new();
    let n = rng.gen_range(1..=8);
    let mut bounds = Vec::new();
    for v in 0..n {
        let lo = rng.gen_range(0..=2);
        let hi = rng.gen_range(lo..=5);
        m.add_integer(format!("v{v}"), lo, hi);
        bounds.push((lo, hi));
    }
    // anchor the right-hand sides at a grid point so most models are feasible
    let anchor: Vec<i64> = bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
    for c in 0..rng.gen_range(1..=4) {
        let mut terms: Vec<(usize, i64)> = Vec::new();
        for v in 0..n {
            let a = rng.gen_range(-4..=4);
            if a != 0 && rng.gen_bool(0.6) {
                terms.push((v, a));
            }
        }
        let at: i64 = terms.iter().map(|&(v, a)| a * anchor[v]).sum();
        let (rel, rhs) = match rng.gen_range(0..5) {
            0 => (Relation::Eq, at + rng.gen_range(-1..=1)),
            1 | 2 => (Relation::Le, at + rng.gen_range(-2..=3)),
            _ => (Relation::Ge, at - rng.gen_range(-2..=3)),
        };
        m.add_constraint(format!("c{c}"), terms.iter().map(|&(v, a)| (VarId(v), rat(a))).collect(), rel, rat(rhs));
    }
    m.set_objective((0..n).map(|v| (VarId(v), rat(rng.gen_range(-5..=5)))).collect());
    (m, bounds)
}

/// Best objective over the integer box, or `None` if no point is feasible.
fn grid_optimum(m: &MilpModel, bounds: &[(i64, i64)]) -> Option<Rational> {
    let mut point: Vec<i64> = bounds.iter().map(|b| b.0).collect();
    let mut best: Option<Rational> = None;
    loop {
        let values: Vec<Rational> = point.iter().map(|&x| rat(x)).collect();
        if m.check(&values, true).is_ok() {
            let obj = m.objective_value(&values);
            if best.as_ref().is_none_or(|b| &obj > b) {
                best = Some(obj);
            }
        }
        let mut i = 0;
        loop {
            if i == point.len() {
                return best;
            }
            if point[i] < bounds[i].1 {
                point[i] += 1;
                break;
            }
            point[i] = bounds[i].0;
            i += 1;
        }
    }
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let opts = MilpOptions { lp: LpOptions { max_pivots: PIVOT_LIMIT }, ..MilpOptions::default() };
    let mut failures = Vec::new();
    let (mut feasible, mut max_pivots) = (0, 0);
    for i in 0..100 {
        let (model, bounds) = random_model(&mut rng);
        let want = grid_optimum(&model, &bounds);
        let reparsed = match lp_format::parse_lp(&lp_format::to_lp_string(&model)) {
            Ok(m) => m,
            Err(e) => {
                failures.push(format!("#{i}: export does not parse: {e}"));
                continue;
            }
        };
        for (label, m) in [("model", &model), ("round trip", &reparsed)] {
            let (sol, stats) = match solve_milp_with(m, &opts) {
                Ok(x) => x,
                Err(e) => {
                    failures.push(format!("#{i} {label}: {e}"));
                    continue;
                }
            };
            max_pivots = max_pivots.max(stats.max_pivots_per_lp);
            match (&want, sol.status) {
                (Some(w), MilpStatus::Optimal) if &sol.objective_value == w => {
                    if let Err(e) = m.check(&sol.values, true) {
                        failures.push(format!("#{i} {label}: {e}"));
                    }
                }
                (None, MilpStatus::Infeasible) => {}
                (w, s) => failures.push(format!("#{i} {label}: grid {w:?}, solver {s} {}", sol.objective_value)),
            }
        }
        feasible += usize::from(want.is_some());
    }
    if max_pivots > PIVOT_LIMIT {
        failures.push(format!("{max_pivots} pivots in one LP"));
    }
    outcome(
        &failures,
        format!(
            "100 models ({feasible} feasible) match grid enumeration, LP round trip kept optima, \
             at most {max_pivots} pivots per LP (limit {PIVOT_LIMIT})"
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = Vec::new();
    let (mut dp_runs, mut prd_builds) = (0, 0);
    for i in 0..100 {
        let inst = shaped(&mut rng, [7, 7, 4, 7], 5, 20);
        let config = DpConfig::new(&inst);
        let profiles = enumerate_profiles(&inst).unwrap();
        let k = config.segments();
        let cells = cell_bound(&inst, k);
        let mut count = 0u128;
        for profile in profiles {
            count += 1;
            let (_, table) = dp_solve(&inst, &config, &profile);
            if table.occupied_cells() as u128 > cells {
                failures.push(format!("#{i}: {} cells above n(n p_max)^r# = {cells}", table.occupied_cells()));
            }
        }
        dp_runs += 1;
        if count > profile_bound(&config) {
            failures.push(format!("#{i}: {count} profiles above p_max^(r#-1) = {}", profile_bound(&config)));
        }

        let (_, map, _) = build_prd_model(&inst).unwrap();
        prd_builds += 1;
        if map.integer_count() as u128 > integer_bound(&inst) {
            failures.push(format!("#{i}: {} integer variables above {}", map.integer_count(), integer_bound(&inst)));
        }
        let s = stats(&inst);
        let direct = (s.p_count * s.r_count * s.d_count * (s.r_count + s.d_count).pow(2)) as u128;
        if direct != integer_bound(&inst) {
            failures.push(format!("#{i}: integer bound helper disagrees"));
        }
    }
    outcome(
        &failures,
        format!("cell, profile and integer-variable bounds held on {dp_runs} dp runs and {prd_builds} builds"),
    )
}

fn main() -> ExitCode {
    let (c3, roundings) = criterion_3();
    let results = [
        criterion_1(),
        criterion_2(),
        c3,
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(&roundings),
        criterion_8(),
        criterion_9(),
    ];
    for (i, r) in results.iter().enumerate() {
        println!("criterion {} {}: {}", i + 1, if r.pass { "PASS" } else { "FAIL" }, r.detail);
    }
    if results.iter().all(|r| r.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
