//! Benchmark harnesses on the synthetic generators.

use std::sync::Arc;
use std::time::{Duration, Instant};

use cpshap_core::allocation::shapley_exact;
use cpshap_core::conformal::{split, ConformalPredictor, CpMethod, CpModels, CpSettings, SplitData};
use cpshap_core::game::TableGame;
use cpshap_core::matrix::restrict_point;
use cpshap_core::regressors::{train, train_dispersion, FittedModel, RegressorSpec, ResidualTransform, TreeParams};
use cpshap_core::rng::derive_seed;
use cpshap_core::synth::{
    default_beta, gen_friedman_variant, gen_sobol_levitan, FriedmanVariantSpec, SobolLevitanSpec,
    SOBOL_LEVITAN_DIM,
};
use cpshap_core::value::IntervalValue;
use cpshap_core::{Coalition, Error, Matrix};
use rayon::prelude::*;

use crate::attribution::{
    attribute_exact, attribute_mc, AttributionConfig, AttributionError, Problem, Sampling,
    TestPoints,
};

/// Splits `n_train + n_cal + n_test` rows into exactly those sizes.
pub fn sized_split(n_train: usize, n_cal: usize, n_test: usize, seed: u64) -> Result<SplitData, Error> {
    let n = n_train + n_cal + n_test;
    let mut s = split(n, (n_train as f64 / n as f64, n_cal as f64 / n as f64), seed)?;
    s.test.sort_unstable();
    Ok(s)
}

/// Settings of the Monte Carlo convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSpec {
    pub n_train: usize,
    pub n_cal: usize,
    pub n_test: usize,
    pub alpha: f64,
    pub beta: [f64; SOBOL_LEVITAN_DIM],
    pub noise_sd: f64,
    pub m_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub method: CpMethod,
    pub value_fn: IntervalValue,
    pub regressor: RegressorSpec,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        ConvergenceSpec {
            n_train: 800,
            n_cal: 200,
            n_test: 50,
            alpha: 0.1,
            beta: default_beta(),
            noise_sd: 1.0,
            m_grid: vec![50, 100, 200, 400],
            reps: 30,
            seed: 1,
            method: CpMethod::Smr,
            value_fn: IntervalValue::Width,
            regressor: RegressorSpec::default(),
        }
    }
}

/// One Monte Carlo run of the study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRun {
    pub m: usize,
    pub rep: usize,
    pub sampling_seed: u64,
    pub trained_count: usize,
    pub wall_time: Duration,
    /// Estimates per test point, per feature.
    pub estimates: Vec<Vec<f64>>,
    pub std_err: Vec<Vec<f64>>,
    /// Mean absolute deviation from the exact values.
    pub mad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub point_ids: Vec<usize>,
    pub exact: Vec<Vec<f64>>,
    pub exact_trained: usize,
    pub exact_wall_time: Duration,
    pub runs: Vec<ConvergenceRun>,
}

impl ConvergenceReport {
    /// Runs for one grid value, in repetition order.
    pub fn runs_for(&self, m: usize) -> impl Iterator<Item = &ConvergenceRun> {
        self.runs.iter().filter(move |r| r.m == m)
    }

    /// Tidy rows: `kind,m,rep,point_id,feature,value,std_err,trained_count,wall_secs`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,m,rep,point_id,feature,value,std_err,trained_count,wall_secs\n");
        let secs = self.exact_wall_time.as_secs_f64();
        for (p, vals) in self.point_ids.iter().zip(&self.exact) {
            for (j, v) in vals.iter().enumerate() {
                out.push_str(&format!("exact,0,0,{p},{},{v},,{},{secs}\n", j + 1, self.exact_trained));
            }
        }
        for run in &self.runs {
            let secs = run.wall_time.as_secs_f64();
            for ((p, vals), ses) in self.point_ids.iter().zip(&run.estimates).zip(&run.std_err) {
                for (j, (v, s)) in vals.iter().zip(ses).enumerate() {
                    out.push_str(&format!(
                        "mc,{},{},{p},{},{v},{s},{},{secs}\n",
                        run.m,
                        run.rep,
                        j + 1,
                        run.trained_count
                    ));
                }
            }
        }
        out
    }
}

/// Exact Shapley baseline followed by `reps` Monte Carlo runs per grid value
/// on Sobol'–Levitan data.
///
/// Runs execute one after another so that their wall times are comparable;
/// each run parallelizes its own training.
pub fn convergence_study(spec: &ConvergenceSpec) -> Result<ConvergenceReport, AttributionError> {
    let n = spec.n_train + spec.n_cal + spec.n_test;
    let data = gen_sobol_levitan(&SobolLevitanSpec {
        beta: spec.beta,
        n,
        noise_sd: spec.noise_sd,
        seed: derive_seed(spec.seed, 0),
    })?;
    let sp = sized_split(spec.n_train, spec.n_cal, spec.n_test, derive_seed(spec.seed, 1))?;
    let problem = Problem::from_split(&data.features, &data.target, &sp);
    let test_x = data.features.select_rows(&sp.test);
    let points = TestPoints::new(&test_x, &sp.test);

    let mut config = AttributionConfig::new(spec.method, spec.alpha).with_regressor(spec.regressor.clone());
    config.value_fns = vec![spec.value_fn];
    config.train_seed = derive_seed(spec.seed, 2);
    let exact = attribute_exact(&config, &problem, points)?;
    let exact_vals: Vec<Vec<f64>> = exact
        .points
        .iter()
        .map(|p| p.records[0].allocation.values.clone())
        .collect();

    let mut runs = Vec::new();
    for &m in &spec.m_grid {
        for rep in 0..spec.reps {
            let mut c = config.clone();
            c.sampling = Sampling::MonteCarlo;
            c.m = m;
            c.sampling_seed = derive_seed(derive_seed(spec.seed, 3 + m as u64), rep as u64);
            let r = attribute_mc(&c, &problem, points)?;
            let estimates: Vec<Vec<f64>> =
                r.points.iter().map(|p| p.records[0].allocation.values.clone()).collect();
            let std_err: Vec<Vec<f64>> = r
                .points
                .iter()
                .map(|p| p.records[0].allocation.std_err.clone().unwrap_or_default())
                .collect();
            let (mut sum, mut count) = (0.0, 0usize);
            for (e, x) in estimates.iter().zip(&exact_vals) {
                for (a, b) in e.iter().zip(x) {
                    sum += (a - b).abs();
                    count += 1;
                }
            }
            runs.push(ConvergenceRun {
                m,
                rep,
                sampling_seed: c.sampling_seed,
                trained_count: r.diagnostics.trained_count,
                wall_time: r.diagnostics.wall_time,
                estimates,
                std_err,
                mad: sum / count.max(1) as f64,
            });
        }
    }
    Ok(ConvergenceReport {
        point_ids: sp.test.clone(),
        exact: exact_vals,
        exact_trained: exact.diagnostics.trained_count,
        exact_wall_time: exact.diagnostics.wall_time,
        runs,
    })
}

/// The four quantities decomposed in the moment comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentTarget {
    /// Conditional-mean model prediction.
    Mean,
    /// Conditional-variance model prediction (fit on squared residuals).
    Variance,
    LacpWidth,
    CqrWidth,
}

impl MomentTarget {
    pub const ALL: [MomentTarget; 4] = [Self::Mean, Self::Variance, Self::LacpWidth, Self::CqrWidth];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Variance => "variance",
            Self::LacpWidth => "lacp_width",
            Self::CqrWidth => "cqr_width",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSpec {
    pub n_train: usize,
    pub n_cal: usize,
    pub n_test: usize,
    pub alpha: f64,
    pub cqr_levels: (f64, f64),
    pub trees: TreeParams,
    pub seed: u64,
}

impl Default for MomentSpec {
    fn default() -> Self {
        MomentSpec {
            n_train: 2000,
            n_cal: 1000,
            n_test: 500,
            alpha: 0.01,
            cqr_levels: (0.1, 0.9),
            trees: TreeParams::default(),
            seed: 1,
        }
    }
}

/// Per-feature summary of one target's allocations over the test set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureSummary {
    pub mean: f64,
    pub mean_abs: f64,
    /// 5% and 95% empirical quantiles.
    pub q05: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub names: Vec<String>,
    pub point_ids: Vec<usize>,
    /// `allocations[t][i][j]`: target `t`, test point `i`, feature `j`.
    pub allocations: Vec<Vec<Vec<f64>>>,
    pub summaries: Vec<Vec<FeatureSummary>>,
    pub trained_models: usize,
    pub wall_time: Duration,
}

impl MomentReport {
    pub fn allocations_for(&self, target: MomentTarget) -> &[Vec<f64>] {
        &self.allocations[target as usize]
    }

    pub fn summary_for(&self, target: MomentTarget) -> &[FeatureSummary] {
        &self.summaries[target as usize]
    }

    /// `point_id,feature,mean,variance,lacp_width,cqr_width`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("point_id,feature");
        for t in MomentTarget::ALL {
            out.push(',');
            out.push_str(t.as_str());
        }
        out.push('\n');
        for (i, p) in self.point_ids.iter().enumerate() {
            for (j, name) in self.names.iter().enumerate() {
                out.push_str(&format!("{p},{name}"));
                for t in MomentTarget::ALL {
                    out.push_str(&format!(",{}", self.allocations[t as usize][i][j]));
                }
                out.push('\n');
            }
        }
        out
    }

    /// `target,feature,mean,mean_abs,q05,q95`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("target,feature,mean,mean_abs,q05,q95\n");
        for t in MomentTarget::ALL {
            for (name, s) in self.names.iter().zip(self.summary_for(t)) {
                out.push_str(&format!(
                    "{},{name},{},{},{},{}\n",
                    t.as_str(),
                    s.mean,
                    s.mean_abs,
                    s.q05,
                    s.q95
                ));
            }
        }
        out
    }
}

/// Models shared by the four targets on one coalition.
struct MomentModels {
    mean: FittedModel,
    variance: FittedModel,
    lacp: ConformalPredictor,
    cqr: ConformalPredictor,
}

/// Exact Shapley attributions of the mean, variance, LACP width and CQR
/// width on Friedman-variant data, using tree ensembles throughout.
pub fn moment_comparison(spec: &MomentSpec) -> Result<MomentReport, Error> {
    let start = Instant::now();
    let n = spec.n_train + spec.n_cal + spec.n_test;
    let fr = gen_friedman_variant(&FriedmanVariantSpec {
        n,
        seed: derive_seed(spec.seed, 0),
    })?;
    let data = fr.data;
    let sp = sized_split(spec.n_train, spec.n_cal, spec.n_test, derive_seed(spec.seed, 1))?;
    let problem = Problem::from_split(&data.features, &data.target, &sp);
    let d = problem.features();
    let trees = RegressorSpec::tree_ensemble(spec.trees)?;
    let seed = derive_seed(spec.seed, 2);
    let mut cqr = CpSettings::new(CpMethod::Cqr, spec.alpha);
    cqr.quantile = trees.clone();
    cqr.cqr_levels = Some(spec.cqr_levels);
    cqr.seed = seed;

    let models: Vec<Arc<MomentModels>> = (0..1u64 << d)
        .into_par_iter()
        .map(|m| {
            let a = Coalition::from_bits(m);
            let tx = problem.train.x.restrict(a);
            let cx = problem.calibration.x.restrict(a);
            let mean = train(&trees, &tx, a, &problem.train.y, seed)?;
            let dispersion = train_dispersion(
                &mean,
                &tx,
                &problem.train.y,
                &trees,
                ResidualTransform::Squared,
                seed,
            )?;
            let variance = dispersion.model().clone();
            let lacp = ConformalPredictor::calibrate(
                CpModels::Lacp {
                    mean: mean.clone(),
                    dispersion,
                },
                &cx,
                &problem.calibration.y,
                spec.alpha,
            )?;
            let cqr = ConformalPredictor::fit(&cqr, a, &tx, &problem.train.y, &cx, &problem.calibration.y)?;
            Ok(Arc::new(MomentModels {
                mean,
                variance,
                lacp,
                cqr,
            }))
        })
        .collect::<Result<_, Error>>()?;

    let test_x: Matrix = data.features.select_rows(&sp.test);
    let per_point: Vec<[Vec<f64>; 4]> = (0..sp.test.len())
        .into_par_iter()
        .map(|i| {
            let x = test_x.row(i);
            let mut tables = [(); 4].map(|_| Vec::with_capacity(models.len()));
            for mm in &models {
                let xa = restrict_point(x, mm.mean.coalition());
                tables[0].push(mm.mean.predict(&xa)?);
                tables[1].push(mm.variance.predict(&xa)?);
                tables[2].push(mm.lacp.predict_interval(&xa)?.width());
                tables[3].push(mm.cqr.predict_interval(&xa)?.width());
            }
            let mut out = [(); 4].map(|_| Vec::new());
            for (t, values) in tables.into_iter().enumerate() {
                let base = values[0];
                let game = TableGame::new(d, values.into_iter().map(|v| v - base).collect())?;
                out[t] = shapley_exact(&game)?.values;
            }
            Ok(out)
        })
        .collect::<Result<_, Error>>()?;

    let mut allocations = vec![Vec::with_capacity(per_point.len()); 4];
    for p in per_point {
        for (t, v) in p.into_iter().enumerate() {
            allocations[t].push(v);
        }
    }
    let summaries = allocations
        .iter()
        .map(|rows| (0..d).map(|j| summarize(rows.iter().map(|r| r[j]).collect())).collect())
        .collect();
    Ok(MomentReport {
        names: data.names,
        point_ids: sp.test,
        allocations,
        summaries,
        trained_models: 4 * models.len(),
        wall_time: start.elapsed(),
    })
}

fn summarize(mut v: Vec<f64>) -> FeatureSummary {
    let n = v.len().max(1) as f64;
    let mean = v.iter().sum::<f64>() / n;
    let mean_abs = v.iter().map(|x| x.abs()).sum::<f64>() / n;
    v.sort_by(f64::total_cmp);
    FeatureSummary {
        mean,
        mean_abs,
        q05: cpshap_core::stats::sorted_quantile(&v, 0.05),
        q95: cpshap_core::stats::sorted_quantile(&v, 0.95),
    }
}
