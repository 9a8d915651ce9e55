//! Coalition-wise conformal predictors and per-point allocations.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use cpshap_core::allocation::{
    proportional_shapley_exact, shapley_exact, AllocationKind, AllocationVector, Estimator,
    ProportionalOptions,
};
use cpshap_core::coalition::MAX_EXHAUSTIVE;
use cpshap_core::conformal::{ConformalPredictor, CpMethod, CpSettings, Interval, SplitData};
use cpshap_core::game::{FnGame, TableGame};
use cpshap_core::matrix::restrict_point;
use cpshap_core::montecarlo::{
    importance_reweight, sample_permutations, IsNormalization, MeanAccumulator,
};
use cpshap_core::order::marginal_contributions;
use cpshap_core::regressors::{RegressorSpec, ResidualTransform};
use cpshap_core::rng::derive_seed;
use cpshap_core::value::{normalize, IntervalValue};
use cpshap_core::{Coalition, Error, Game, Matrix, Permutation, RandomOrderDistribution};
use rayon::prelude::*;

/// Rows and targets of one fold.
#[derive(Debug, Clone)]
pub struct Fold {
    pub x: Matrix,
    pub y: Vec<f64>,
}

impl Fold {
    pub fn select(features: &Matrix, target: &[f64], rows: &[usize]) -> Self {
        Fold {
            x: features.select_rows(rows),
            y: rows.iter().map(|&i| target[i]).collect(),
        }
    }
}

/// Training and calibration folds shared by every coalition.
#[derive(Debug, Clone)]
pub struct Problem {
    pub train: Fold,
    pub calibration: Fold,
}

impl Problem {
    pub fn from_split(features: &Matrix, target: &[f64], split: &SplitData) -> Self {
        Problem {
            train: Fold::select(features, target, &split.train),
            calibration: Fold::select(features, target, &split.calibration),
        }
    }

    pub fn features(&self) -> usize {
        self.train.x.cols()
    }
}

type Slot = Arc<OnceLock<Result<Arc<ConformalPredictor>, Error>>>;

/// Trains each coalition's predictor at most once, even under concurrent
/// requests for the same coalition.
pub struct CoalitionModelCache<'a> {
    problem: &'a Problem,
    settings: CpSettings,
    slots: Mutex<HashMap<Coalition, Slot>>,
    trained: AtomicUsize,
}

impl<'a> CoalitionModelCache<'a> {
    pub fn new(problem: &'a Problem, settings: CpSettings) -> Self {
        CoalitionModelCache {
            problem,
            settings,
            slots: Mutex::new(HashMap::new()),
            trained: AtomicUsize::new(0),
        }
    }

    pub fn settings(&self) -> &CpSettings {
        &self.settings
    }

    pub fn trained_count(&self) -> usize {
        self.trained.load(Ordering::Relaxed)
    }

    pub fn predictor(&self, a: Coalition) -> Result<Arc<ConformalPredictor>, Error> {
        if !a.fits(self.problem.features()) {
            return Err(Error::Dimension(format!(
                "coalition {:#x} outside {} features",
                a.bits(),
                self.problem.features()
            )));
        }
        let slot = {
            let mut slots = self.slots.lock().expect("cache lock poisoned");
            slots.entry(a).or_default().clone()
        };
        slot.get_or_init(|| {
            self.trained.fetch_add(1, Ordering::Relaxed);
            let p = self.problem;
            ConformalPredictor::fit(
                &self.settings,
                a,
                &p.train.x.restrict(a),
                &p.train.y,
                &p.calibration.x.restrict(a),
                &p.calibration.y,
            )
            .map(Arc::new)
        })
        .clone()
    }

    /// Trains every listed coalition, in parallel.
    pub fn warm(
        &self,
        coalitions: &[Coalition],
    ) -> Result<HashMap<Coalition, Arc<ConformalPredictor>>, Error> {
        coalitions
            .par_iter()
            .map(|&a| Ok((a, self.predictor(a)?)))
            .collect()
    }

    /// Interval of coalition `a` at the full feature vector `x`.
    pub fn interval(&self, a: Coalition, x: &[f64]) -> Result<Interval, Error> {
        self.predictor(a)?.predict_interval(&restrict_point(x, a))
    }
}

/// Which allocations to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Allocations {
    Shapley,
    Proportional,
    Both,
}

impl Allocations {
    pub fn kinds(self) -> &'static [AllocationKind] {
        match self {
            Allocations::Shapley => &[AllocationKind::Shapley],
            Allocations::Proportional => &[AllocationKind::ProportionalShapley],
            Allocations::Both => &[AllocationKind::Shapley, AllocationKind::ProportionalShapley],
        }
    }
}

/// How allocations are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// All `2^d` coalitions.
    Exact,
    /// Shared uniform permutations; proportional Shapley is reweighted from
    /// them unless `ps_direct` is set.
    MonteCarlo,
    /// One uniform stream for both allocations, proportional Shapley always
    /// by importance sampling.
    ImportanceBoth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionConfig {
    pub method: CpMethod,
    pub value_fns: Vec<IntervalValue>,
    /// Divide allocations by `v(D, x) - v(empty)`.
    pub normalized: bool,
    pub allocations: Allocations,
    pub sampling: Sampling,
    pub m: usize,
    pub alpha: f64,
    pub mean: RegressorSpec,
    pub dispersion: RegressorSpec,
    pub quantile: RegressorSpec,
    pub transform: ResidualTransform,
    pub cqr_levels: Option<(f64, f64)>,
    pub train_seed: u64,
    pub sampling_seed: u64,
    /// Sample proportional orderings per test point instead of reweighting
    /// the shared uniform sample.
    pub ps_direct: bool,
    pub proportional: ProportionalOptions,
}

impl AttributionConfig {
    pub fn new(method: CpMethod, alpha: f64) -> Self {
        AttributionConfig {
            method,
            value_fns: vec![IntervalValue::Width],
            normalized: false,
            allocations: Allocations::Shapley,
            sampling: Sampling::Exact,
            m: 1000,
            alpha,
            mean: RegressorSpec::default(),
            dispersion: RegressorSpec::default(),
            quantile: RegressorSpec::default(),
            transform: ResidualTransform::Absolute,
            cqr_levels: None,
            train_seed: 0,
            sampling_seed: 0,
            ps_direct: false,
            proportional: ProportionalOptions::default(),
        }
    }

    /// Uses the same regressor family for every role.
    pub fn with_regressor(mut self, spec: RegressorSpec) -> Self {
        self.mean = spec.clone();
        self.dispersion = spec.clone();
        self.quantile = spec;
        self
    }

    pub fn cp_settings(&self) -> CpSettings {
        CpSettings {
            method: self.method,
            alpha: self.alpha,
            mean: self.mean.clone(),
            dispersion: self.dispersion.clone(),
            quantile: self.quantile.clone(),
            transform: self.transform,
            cqr_levels: self.cqr_levels,
            seed: self.train_seed,
        }
    }

    pub fn validate(&self, d: usize) -> Result<(), Error> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.value_fns.is_empty() {
            return Err(Error::Parameter("no value function selected".into()));
        }
        if d == 0 || d > cpshap_core::coalition::MAX_PLAYERS {
            return Err(Error::Dimension(format!("{d} features; 1..=64 supported")));
        }
        match self.sampling {
            Sampling::Exact if d > MAX_EXHAUSTIVE => Err(Error::Dimension(format!(
                "exact attribution needs at most {MAX_EXHAUSTIVE} features, got {d}"
            ))),
            Sampling::MonteCarlo | Sampling::ImportanceBoth if self.m == 0 => {
                Err(Error::Parameter("m must be at least 1".into()))
            }
            Sampling::ImportanceBoth if self.ps_direct => Err(Error::Parameter(
                "direct proportional sampling conflicts with the shared importance stream".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// One allocation for one test point and value function.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationRecord {
    pub value_fn: IntervalValue,
    pub normalized: bool,
    pub allocation: AllocationVector,
    pub v_full: f64,
    pub v_empty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointAttribution {
    pub point_id: usize,
    /// Interval of the all-features predictor.
    pub interval: Interval,
    /// Interval of the no-feature predictor.
    pub empty_interval: Interval,
    pub records: Vec<AllocationRecord>,
}

impl PointAttribution {
    pub fn record(&self, value_fn: IntervalValue, kind: AllocationKind) -> Option<&AllocationRecord> {
        self.records
            .iter()
            .find(|r| r.value_fn == value_fn && r.allocation.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub trained_count: usize,
    pub wall_time: Duration,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionResult {
    pub features: usize,
    pub points: Vec<PointAttribution>,
    pub diagnostics: Diagnostics,
}

/// Failure of a run, with the test points that triggered it.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionError {
    pub error: Error,
    pub points: Vec<usize>,
}

impl fmt::Display for AttributionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.points.is_empty() {
            write!(f, "{}", self.error)
        } else {
            let ids: Vec<String> = self.points.iter().map(|p| p.to_string()).collect();
            write!(f, "{} (test points {})", self.error, ids.join(", "))
        }
    }
}

impl std::error::Error for AttributionError {}

impl From<Error> for AttributionError {
    fn from(error: Error) -> Self {
        AttributionError {
            error,
            points: Vec::new(),
        }
    }
}

/// Test points as rows of `x`, labelled by `ids`.
#[derive(Debug, Clone, Copy)]
pub struct TestPoints<'a> {
    pub x: &'a Matrix,
    pub ids: &'a [usize],
}

impl<'a> TestPoints<'a> {
    pub fn new(x: &'a Matrix, ids: &'a [usize]) -> Self {
        assert_eq!(x.rows(), ids.len(), "one id per test row");
        TestPoints { x, ids }
    }
}

/// Runs the configured estimator.
pub fn attribute(
    config: &AttributionConfig,
    problem: &Problem,
    points: TestPoints<'_>,
) -> Result<AttributionResult, AttributionError> {
    match config.sampling {
        Sampling::Exact => attribute_exact(config, problem, points),
        Sampling::MonteCarlo | Sampling::ImportanceBoth => attribute_mc(config, problem, points),
    }
}

/// Trains all `2^d` predictors and computes exact allocations.
pub fn attribute_exact(
    config: &AttributionConfig,
    problem: &Problem,
    points: TestPoints<'_>,
) -> Result<AttributionResult, AttributionError> {
    let start = Instant::now();
    let d = problem.features();
    let mut exact = config.clone();
    exact.sampling = Sampling::Exact;
    exact.validate(d)?;
    let cache = CoalitionModelCache::new(problem, config.cp_settings());
    let predictors: Vec<Arc<ConformalPredictor>> = (0..1u64 << d)
        .into_par_iter()
        .map(|m| cache.predictor(Coalition::from_bits(m)))
        .collect::<Result<_, _>>()?;

    let per_point = |i: usize| -> Result<PointAttribution, Error> {
        let x = points.x.row(i);
        let intervals: Vec<Interval> = predictors
            .iter()
            .map(|p| p.predict_interval(&restrict_point(x, p.coalition())))
            .collect::<Result<_, _>>()?;
        let mut records = Vec::new();
        for &vf in &config.value_fns {
            let values: Vec<f64> = intervals.iter().map(|iv| vf.of(iv)).collect();
            let v_empty = values[0];
            let v_full = values[values.len() - 1];
            let centered = TableGame::new(d, values.iter().map(|v| v - v_empty).collect())?;
            for &kind in config.allocations.kinds() {
                let alloc = match kind {
                    AllocationKind::Shapley => shapley_exact(&centered)?,
                    AllocationKind::ProportionalShapley => {
                        proportional_shapley_exact(&centered, config.proportional)?
                    }
                };
                records.push(finish(config, vf, alloc, v_full, v_empty, points.ids[i])?);
            }
        }
        Ok(PointAttribution {
            point_id: points.ids[i],
            interval: intervals[intervals.len() - 1],
            empty_interval: intervals[0],
            records,
        })
    };
    let out = collect_points(points, per_point)?;
    Ok(AttributionResult {
        features: d,
        points: out,
        diagnostics: Diagnostics {
            trained_count: cache.trained_count(),
            wall_time: start.elapsed(),
            m: 0,
        },
    })
}

/// Random-order estimates from `m` permutations shared by all test points.
pub fn attribute_mc(
    config: &AttributionConfig,
    problem: &Problem,
    points: TestPoints<'_>,
) -> Result<AttributionResult, AttributionError> {
    let start = Instant::now();
    let d = problem.features();
    config.validate(d)?;
    if config.sampling == Sampling::Exact {
        return Err(Error::Parameter("sampled attribution called with the exact estimator".into()).into());
    }
    let m = config.m;
    let uniform = RandomOrderDistribution::uniform(d)?;
    let perms = sample_permutations(&uniform, m, config.sampling_seed);
    let wants_ps = config.allocations.kinds().contains(&AllocationKind::ProportionalShapley);
    let ps_direct = wants_ps && config.ps_direct && config.sampling == Sampling::MonteCarlo;
    let wants_shap = config.allocations.kinds().contains(&AllocationKind::Shapley);
    let shared_needed = wants_shap || (wants_ps && !ps_direct);

    let mut needed: BTreeSet<Coalition> = BTreeSet::new();
    needed.insert(Coalition::EMPTY);
    needed.insert(Coalition::full(d));
    if shared_needed {
        for pi in &perms {
            needed.extend(pi.prefixes());
        }
    }
    if wants_ps {
        needed.extend((0..d).map(Coalition::singleton));
    }
    let needed: Vec<Coalition> = needed.into_iter().collect();
    let cache = CoalitionModelCache::new(problem, config.cp_settings());
    let warm = cache.warm(&needed)?;

    let per_point = |i: usize| -> Result<PointAttribution, Error> {
        let x = points.x.row(i);
        let point_id = points.ids[i];
        let mut intervals: HashMap<Coalition, Interval> = HashMap::with_capacity(warm.len());
        for (&a, p) in &warm {
            intervals.insert(a, p.predict_interval(&restrict_point(x, a))?);
        }
        let empty = intervals[&Coalition::EMPTY];
        let full = intervals[&Coalition::full(d)];
        let mut records = Vec::new();
        for &vf in &config.value_fns {
            let v_empty = vf.of(&empty);
            let v_full = vf.of(&full);
            let shared = if shared_needed {
                let game = FnGame::new(d, |a| vf.of(&intervals[&a]) - v_empty)?;
                perms
                    .iter()
                    .map(|pi| Ok((pi.clone(), marginal_contributions(&game, pi)?)))
                    .collect::<Result<Vec<(Permutation, Vec<f64>)>, Error>>()?
            } else {
                Vec::new()
            };
            for &kind in config.allocations.kinds() {
                let alloc = match kind {
                    AllocationKind::Shapley => plain_average(&shared, d, kind, config),
                    AllocationKind::ProportionalShapley => {
                        let singles: Vec<f64> = (0..d)
                            .map(|j| vf.of(&intervals[&Coalition::singleton(j)]) - v_empty)
                            .collect();
                        let ps = RandomOrderDistribution::proportional(&singles)?;
                        if ps_direct {
                            let seed = derive_seed(config.sampling_seed, point_id as u64);
                            let own = sample_permutations(&ps, m, seed);
                            let game = CachedGame {
                                cache: &cache,
                                x,
                                value_fn: vf,
                                v_empty,
                            };
                            let samples = own
                                .into_iter()
                                .map(|pi| {
                                    let mc = marginal_contributions(&game, &pi)?;
                                    Ok((pi, mc))
                                })
                                .collect::<Result<Vec<_>, Error>>()?;
                            let mut alloc = plain_average(&samples, d, kind, config);
                            alloc.seed = Some(seed);
                            alloc
                        } else {
                            let mut alloc = importance_reweight(
                                &shared,
                                &uniform,
                                &ps,
                                IsNormalization::SelfNormalized,
                            )?;
                            alloc.seed = Some(config.sampling_seed);
                            alloc
                        }
                    }
                };
                records.push(finish(config, vf, alloc, v_full, v_empty, point_id)?);
            }
        }
        Ok(PointAttribution {
            point_id,
            interval: full,
            empty_interval: empty,
            records,
        })
    };
    let out = collect_points(points, per_point)?;
    Ok(AttributionResult {
        features: d,
        points: out,
        diagnostics: Diagnostics {
            trained_count: cache.trained_count(),
            wall_time: start.elapsed(),
            m,
        },
    })
}

/// Centered value game of one test point, trained on demand.
struct CachedGame<'c, 'a> {
    cache: &'c CoalitionModelCache<'a>,
    x: &'c [f64],
    value_fn: IntervalValue,
    v_empty: f64,
}

impl Game for CachedGame<'_, '_> {
    fn players(&self) -> usize {
        self.cache.problem.features()
    }

    fn value(&self, a: Coalition) -> Result<f64, Error> {
        Ok(self.value_fn.of(&self.cache.interval(a, self.x)?) - self.v_empty)
    }
}

fn plain_average(
    samples: &[(Permutation, Vec<f64>)],
    d: usize,
    kind: AllocationKind,
    config: &AttributionConfig,
) -> AllocationVector {
    let mut acc = MeanAccumulator::new(d);
    for (_, mc) in samples {
        acc.push(mc);
    }
    AllocationVector {
        std_err: Some(acc.std_err()),
        values: acc.mean().to_vec(),
        kind,
        estimator: Estimator::MonteCarlo,
        m: samples.len(),
        seed: Some(config.sampling_seed),
    }
}

fn finish(
    config: &AttributionConfig,
    value_fn: IntervalValue,
    mut allocation: AllocationVector,
    v_full: f64,
    v_empty: f64,
    point: usize,
) -> Result<AllocationRecord, Error> {
    if config.sampling == Sampling::ImportanceBoth {
        allocation.estimator = Estimator::ImportanceSampling;
    }
    if config.normalized {
        allocation.values = normalize(&allocation.values, v_full, v_empty, point)?;
        if let Some(se) = &allocation.std_err {
            allocation.std_err = Some(normalize(se, v_full, v_empty, point)?.iter().map(|s| s.abs()).collect());
        }
    }
    if allocation.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateWeights(format!(
            "non-finite allocation for test point {point}"
        )));
    }
    Ok(AllocationRecord {
        value_fn,
        normalized: config.normalized,
        allocation,
        v_full,
        v_empty,
    })
}

/// Runs `f` on every test point in parallel, keeping index order and
/// gathering the ids of all failing points.
fn collect_points<F>(points: TestPoints<'_>, f: F) -> Result<Vec<PointAttribution>, AttributionError>
where
    F: Fn(usize) -> Result<PointAttribution, Error> + Sync,
{
    let results: Vec<Result<PointAttribution, Error>> =
        (0..points.ids.len()).into_par_iter().map(|i| f(i)).collect();
    let mut failed = Vec::new();
    let mut first = None;
    let mut out = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => out.push(p),
            Err(e) => {
                failed.push(points.ids[i]);
                first.get_or_insert(e);
            }
        }
    }
    match first {
        Some(error) => Err(AttributionError {
            error,
            points: failed,
        }),
        None => Ok(out),
    }
}
