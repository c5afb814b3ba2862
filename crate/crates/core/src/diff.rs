//! Edit-operation counting between editions.
//!
//! Native route: a measure-local, unit-cost alignment of notation element
//! sequences, staff by staff. External route: a parser for musicdiff-style
//! text logs whose operation lines look like
//! `@@ measure 12, staff 1, beat 3.5@@`.

use crate::score::{Measure, NotationElement, Score};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpKind {
    Insert,
    Delete,
    Modify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditOperation {
    pub kind: OpKind,
    pub measure: u32,
    pub staff: u32,
    /// Element ordinal within the staff (left side for Delete/Modify,
    /// right side for Insert). For parsed logs this holds the beat field,
    /// stored verbatim in `detail`.
    pub position: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub left_id: String,
    pub right_id: String,
    pub operations: Vec<EditOperation>,
    pub delta: u64,
    pub per_measure: BTreeMap<u32, u64>,
}

impl DiffReport {
    fn from_operations(left_id: &str, right_id: &str, operations: Vec<EditOperation>) -> Self {
        let mut per_measure: BTreeMap<u32, u64> = BTreeMap::new();
        for op in &operations {
            *per_measure.entry(op.measure).or_insert(0) += 1;
        }
        DiffReport {
            left_id: left_id.to_string(),
            right_id: right_id.to_string(),
            delta: operations.len() as u64,
            operations,
            per_measure,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("left_id,right_id,measure,count\n");
        for (measure, count) in &self.per_measure {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.left_id, self.right_id, measure, count
            ));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("measure {measure} missing from edition {edition:?}; editions are not comparable")]
    Comparability { measure: u32, edition: String },
}

/// Which attributes participate in token equality, per element kind.
/// Kinds not listed compare all attributes.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DiffConfig {
    pub compared_attrs: BTreeMap<String, Vec<String>>,
}

impl DiffConfig {
    fn tokens_equal(&self, a: &NotationElement, b: &NotationElement) -> bool {
        debug_assert_eq!(a.kind, b.kind);
        match self.compared_attrs.get(&a.kind) {
            Some(keys) => keys.iter().all(|k| a.attrs.get(k) == b.attrs.get(k)),
            None => a.attrs == b.attrs,
        }
    }
}

/// Minimum-cost alignment of two same-numbered measures under unit costs.
/// Substitution (Modify) is only available between tokens of the same kind:
/// cost 0 when the compared attributes agree, 1 otherwise. Ties are broken
/// by preferring Modify over an Insert+Delete pair, then leftmost.
pub fn diff_measures(left: &Measure, right: &Measure, config: &DiffConfig) -> Vec<EditOperation> {
    let staff_numbers: BTreeSet<u32> = left
        .staves
        .iter()
        .chain(right.staves.iter())
        .map(|s| s.number)
        .collect();

    let empty: Vec<NotationElement> = Vec::new();
    let mut operations = Vec::new();
    for staff in staff_numbers {
        let ls = left
            .staves
            .iter()
            .find(|s| s.number == staff)
            .map(|s| &s.elements)
            .unwrap_or(&empty);
        let rs = right
            .staves
            .iter()
            .find(|s| s.number == staff)
            .map(|s| &s.elements)
            .unwrap_or(&empty);
        align_staff(ls, rs, left.number, staff, config, &mut operations);
    }
    operations
}

fn align_staff(
    left: &[NotationElement],
    right: &[NotationElement],
    measure: u32,
    staff: u32,
    config: &DiffConfig,
    out: &mut Vec<EditOperation>,
) {
    let m = left.len();
    let n = right.len();
    // Objective is lexicographic: minimize cost, then maximize the number of
    // diagonal (match/Modify) steps. The secondary objective makes the
    // operation counts canonical: they are invariant under swapping the two
    // sides, and Modify is preferred over an Insert+Delete pair.
    let mut dp = vec![vec![(0u32, 0u32); n + 1]; m + 1]; // (cost, diag)
    for i in 0..=m {
        dp[i][0] = (i as u32, 0);
    }
    for j in 0..=n {
        dp[0][j] = (j as u32, 0);
    }
    let better = |a: (u32, u32), b: (u32, u32)| a.0 < b.0 || (a.0 == b.0 && a.1 > b.1);
    for i in 1..=m {
        for j in 1..=n {
            let del = dp[i - 1][j];
            let ins = dp[i][j - 1];
            let mut best = (del.0 + 1, del.1);
            let ins_val = (ins.0 + 1, ins.1);
            if better(ins_val, best) {
                best = ins_val;
            }
            if left[i - 1].kind == right[j - 1].kind {
                let sub = if config.tokens_equal(&left[i - 1], &right[j - 1]) {
                    0
                } else {
                    1
                };
                let diag = dp[i - 1][j - 1];
                let diag_val = (diag.0 + sub, diag.1 + 1);
                if better(diag_val, best) {
                    best = diag_val;
                }
            }
            dp[i][j] = best;
        }
    }

    // Traceback, diagonal first.
    let mut ops_rev = Vec::new();
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && left[i - 1].kind == right[j - 1].kind {
            let cost = if config.tokens_equal(&left[i - 1], &right[j - 1]) {
                0
            } else {
                1
            };
            if dp[i][j] == (dp[i - 1][j - 1].0 + cost, dp[i - 1][j - 1].1 + 1) {
                if cost == 1 {
                    ops_rev.push(EditOperation {
                        kind: OpKind::Modify,
                        measure,
                        staff,
                        position: i - 1,
                        detail: describe_modify(&left[i - 1], &right[j - 1]),
                    });
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[i][j] == (dp[i - 1][j].0 + 1, dp[i - 1][j].1) {
            ops_rev.push(EditOperation {
                kind: OpKind::Delete,
                measure,
                staff,
                position: i - 1,
                detail: format!("delete {}", left[i - 1].kind),
            });
            i -= 1;
        } else {
            ops_rev.push(EditOperation {
                kind: OpKind::Insert,
                measure,
                staff,
                position: j - 1,
                detail: format!("insert {}", right[j - 1].kind),
            });
            j -= 1;
        }
    }
    out.extend(ops_rev.into_iter().rev());
}

fn describe_modify(left: &NotationElement, right: &NotationElement) -> String {
    let keys: BTreeSet<&String> = left.attrs.keys().chain(right.attrs.keys()).collect();
    let changed: Vec<String> = keys
        .into_iter()
        .filter(|k| left.attrs.get(*k) != right.attrs.get(*k))
        .map(|k| {
            format!(
                "{}: {:?} -> {:?}",
                k,
                left.attrs.get(k).map(|s| s.as_str()).unwrap_or(""),
                right.attrs.get(k).map(|s| s.as_str()).unwrap_or("")
            )
        })
        .collect();
    format!("{} {}", left.kind, changed.join(", "))
}

/// Sums measure-local diffs over the selection (or over all shared measures
/// when no selection is given). A selected measure missing on either side is
/// a comparability failure.
pub fn diff_scores(
    left: &Score,
    right: &Score,
    selection: Option<&BTreeSet<u32>>,
    config: &DiffConfig,
) -> Result<DiffReport, DiffError> {
    let left_numbers = left.measure_numbers();
    let right_numbers = right.measure_numbers();
    let targets: Vec<u32> = match selection {
        Some(sel) => {
            for &n in sel {
                if !left_numbers.contains(&n) {
                    return Err(DiffError::Comparability {
                        measure: n,
                        edition: left.edition_id.clone(),
                    });
                }
                if !right_numbers.contains(&n) {
                    return Err(DiffError::Comparability {
                        measure: n,
                        edition: right.edition_id.clone(),
                    });
                }
            }
            sel.iter().copied().collect()
        }
        None => left_numbers.intersection(&right_numbers).copied().collect(),
    };

    let mut operations = Vec::new();
    for n in targets {
        let lm = left.measure(n).expect("checked above");
        let rm = right.measure(n).expect("checked above");
        operations.extend(diff_measures(lm, rm, config));
    }
    Ok(DiffReport::from_operations(
        &left.edition_id,
        &right.edition_id,
        operations,
    ))
}

fn musicdiff_line_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"@@ measure (\d+), staff (\d+), beat ([0-9]+(?:\.[0-9]+)?)@@").unwrap()
    })
}

/// Counts musicdiff operation lines; everything else in the log is ignored.
/// The beat field is stored verbatim (its indexing base is unspecified).
pub fn parse_musicdiff_log(text: &str, left_id: &str, right_id: &str) -> DiffReport {
    let re = musicdiff_line_pattern();
    let mut operations = Vec::new();
    for caps in re.captures_iter(text) {
        let measure: u32 = caps[1].parse().unwrap_or(0);
        let staff: u32 = caps[2].parse().unwrap_or(0);
        operations.push(EditOperation {
            kind: OpKind::Modify,
            measure,
            staff,
            position: 0,
            detail: format!("beat {}", &caps[3]),
        });
    }
    DiffReport::from_operations(left_id, right_id, operations)
}
