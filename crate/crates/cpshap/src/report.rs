//! Output files: `allocations.json`, rank tables and agreement tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use cpshap_core::allocation::AllocationKind;
use cpshap_core::rank::{compare_allocations, rank_frequency};
use serde::{Deserialize, Serialize};

use crate::attribution::AttributionResult;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalOut {
    pub lower: f64,
    pub upper: f64,
    pub crossed: bool,
}

/// One allocation for one test point, as serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationOut {
    pub point_id: usize,
    pub method: String,
    pub value_fn: String,
    pub normalized: bool,
    pub allocation_kind: String,
    pub estimator: String,
    pub m: usize,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_err: Option<Vec<f64>>,
    pub interval: IntervalOut,
    pub v_full: f64,
    pub v_empty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationsFile {
    pub schema_version: u32,
    pub features: Vec<String>,
    pub records: Vec<AllocationOut>,
}

impl AllocationsFile {
    pub fn from_result(result: &AttributionResult, method: &str, features: &[String]) -> Self {
        let mut records = Vec::new();
        for p in &result.points {
            for r in &p.records {
                records.push(AllocationOut {
                    point_id: p.point_id,
                    method: method.to_owned(),
                    value_fn: r.value_fn.as_str().to_owned(),
                    normalized: r.normalized,
                    allocation_kind: r.allocation.kind.as_str().to_owned(),
                    estimator: r.allocation.estimator.as_str().to_owned(),
                    m: r.allocation.m,
                    values: r.allocation.values.clone(),
                    std_err: r.allocation.std_err.clone(),
                    interval: IntervalOut {
                        lower: p.interval.lower,
                        upper: p.interval.upper,
                        crossed: p.interval.crossed,
                    },
                    v_full: r.v_full,
                    v_empty: r.v_empty,
                });
            }
        }
        AllocationsFile {
            schema_version: SCHEMA_VERSION,
            features: features.to_vec(),
            records,
        }
    }

    pub fn to_json(&self) -> Result<String, String> {
        serde_json::to_string_pretty(self).map_err(|e| e.to_string())
    }

    /// Parses and checks shape and finiteness.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let file: AllocationsFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(format!("unsupported schema version {}", file.schema_version));
        }
        let d = file.features.len();
        if d == 0 {
            return Err("no features listed".into());
        }
        for r in &file.records {
            if r.values.len() != d || r.std_err.as_ref().is_some_and(|s| s.len() != d) {
                return Err(format!("record for point {} has the wrong length", r.point_id));
            }
            if r.values.iter().any(|v| !v.is_finite()) {
                return Err(format!("record for point {} has non-finite values", r.point_id));
            }
        }
        Ok(file)
    }

    /// Records grouped by (value function, normalized, allocation kind),
    /// each group in point order.
    pub fn groups(&self) -> BTreeMap<GroupKey, Vec<&AllocationOut>> {
        let mut out: BTreeMap<GroupKey, Vec<&AllocationOut>> = BTreeMap::new();
        for r in &self.records {
            out.entry(GroupKey::of(r)).or_default().push(r);
        }
        for v in out.values_mut() {
            v.sort_by_key(|r| r.point_id);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub value_fn: String,
    pub normalized: bool,
    pub allocation_kind: String,
}

impl GroupKey {
    fn of(r: &AllocationOut) -> Self {
        GroupKey {
            value_fn: r.value_fn.clone(),
            normalized: r.normalized,
            allocation_kind: r.allocation_kind.clone(),
        }
    }
}

/// Rank-frequency and top-5 tables, plus the agreement table when both
/// allocation kinds are present.
#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub rank_matrix: String,
    pub top5: String,
    pub agreement: Option<String>,
}

pub fn tables(file: &AllocationsFile) -> Result<Tables, String> {
    let d = file.features.len();
    let groups = file.groups();
    if groups.is_empty() {
        return Err("no allocation records".into());
    }
    let mut rank_matrix = String::from("value_fn,normalized,allocation_kind,feature");
    for r in 1..=d {
        let _ = write!(rank_matrix, ",rank_{r}");
    }
    rank_matrix.push('\n');
    let mut top5 = String::from("value_fn,normalized,allocation_kind,rank,feature,frequency\n");
    for (key, recs) in &groups {
        let vals: Vec<Vec<f64>> = recs.iter().map(|r| r.values.clone()).collect();
        let rf = rank_frequency(&vals).map_err(|e| e.to_string())?;
        let prefix = format!("{},{},{}", key.value_fn, key.normalized, key.allocation_kind);
        for (i, row) in rf.matrix.iter().enumerate() {
            let _ = write!(rank_matrix, "{prefix},{}", csv_field(&file.features[i]));
            for v in row {
                let _ = write!(rank_matrix, ",{v}");
            }
            rank_matrix.push('\n');
        }
        for (r, (feature, freq)) in rf.top.iter().enumerate() {
            let _ = writeln!(
                top5,
                "{prefix},{},{},{freq}",
                r + 1,
                csv_field(&file.features[*feature])
            );
        }
    }

    let shap = AllocationKind::Shapley.as_str();
    let pshap = AllocationKind::ProportionalShapley.as_str();
    let mut agreement = String::from("value_fn,normalized,point_id,kendall_tau,top1_agree\n");
    let mut any = false;
    for (key, a) in &groups {
        if key.allocation_kind != shap {
            continue;
        }
        let other = GroupKey {
            allocation_kind: pshap.to_owned(),
            ..key.clone()
        };
        let Some(b) = groups.get(&other) else { continue };
        if a.iter().map(|r| r.point_id).ne(b.iter().map(|r| r.point_id)) {
            return Err("allocation kinds cover different test points".into());
        }
        let va: Vec<Vec<f64>> = a.iter().map(|r| r.values.clone()).collect();
        let vb: Vec<Vec<f64>> = b.iter().map(|r| r.values.clone()).collect();
        let agree = compare_allocations(&va, &vb).map_err(|e| e.to_string())?;
        for ((r, tau), (x, y)) in a.iter().zip(&agree.taus).zip(va.iter().zip(&vb)) {
            let top_same = cpshap_core::rank::rank_order(x)[0] == cpshap_core::rank::rank_order(y)[0];
            let _ = writeln!(
                agreement,
                "{},{},{},{tau},{}",
                key.value_fn,
                key.normalized,
                r.point_id,
                u8::from(top_same)
            );
        }
        let _ = writeln!(
            agreement,
            "{},{},all,{},{}",
            key.value_fn, key.normalized, agree.mean_tau, agree.top1
        );
        any = true;
    }
    Ok(Tables {
        rank_matrix,
        top5,
        agreement: any.then_some(agreement),
    })
}

/// Quotes a CSV field when needed.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
