//! Greedy pairing of a player's equilibrium resources with its optimal ones.
//!
//! Equilibrium resources are weighted `C_r^M` and visited in decreasing
//! congestion order; optimal resources are weighted `(C_r + 1)^M` and visited
//! in increasing congestion order. Each optimal resource is a bucket of that
//! weight which at most two pairs may draw from:
//!
//! * an equilibrium resource that does not fit into what is left of the
//!   current bucket opens a pair of its own and takes consecutive buckets
//!   until covered; the last bucket's remainder carries over to the next pair;
//! * equilibrium resources that fit are grouped onto the current bucket alone,
//!   keeping at least one resource back for every untouched bucket.
//!
//! Buckets left untouched at the end join the last pair when that pair has a
//! single equilibrium resource. If the buckets run out first, the greedy is
//! rerun letting each pair count the full weight of a boundary bucket it
//! shares with the previous pair.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{delay, Cost, ResourceId};

/// One `(L, L*)` element of a partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPair {
    /// Part of the equilibrium strategy, in processing order.
    pub eq_part: Vec<ResourceId>,
    /// Contiguous run of the sorted optimal strategy.
    pub opt_part: Vec<ResourceId>,
}

fn eq_weight(congestion: &[u32], r: ResourceId, degree: u32) -> Result<Cost> {
    delay(u64::from(congestion[r]), degree)
}

fn opt_weight(congestion: &[u32], r: ResourceId, degree: u32) -> Result<Cost> {
    delay(u64::from(congestion[r]) + 1, degree)
}

fn sum_weights(
    rs: &[ResourceId],
    congestion: &[u32],
    degree: u32,
    weight: fn(&[u32], ResourceId, u32) -> Result<Cost>,
) -> Result<Cost> {
    rs.iter().try_fold(0 as Cost, |acc, &r| {
        acc.checked_add(weight(congestion, r, degree)?)
            .ok_or(Error::Overflow("partition weight"))
    })
}

/// `sum_{r in eq} C_r^M`.
pub fn eq_cost(eq: &[ResourceId], congestion: &[u32], degree: u32) -> Result<Cost> {
    sum_weights(eq, congestion, degree, eq_weight)
}

/// `sum_{r in opt} (C_r + 1)^M`.
pub fn cover_cost(opt: &[ResourceId], congestion: &[u32], degree: u32) -> Result<Cost> {
    sum_weights(opt, congestion, degree, opt_weight)
}

fn validate_input(eq: &[ResourceId], opt: &[ResourceId], congestion: &[u32]) -> Result<()> {
    let bad = |msg: String| Err(Error::PartitionPrecondition(msg));
    if eq.is_empty() || opt.is_empty() {
        return bad("equilibrium and optimal sets must be nonempty".into());
    }
    let mut seen = BTreeMap::new();
    for (&r, side) in eq.iter().map(|r| (r, "eq")).chain(opt.iter().map(|r| (r, "opt"))) {
        if r >= congestion.len() {
            return bad(format!("resource {r} has no congestion entry"));
        }
        if let Some(prev) = seen.insert(r, side) {
            return bad(format!(
                "resource {r} appears in both {prev} and {side} (or twice)"
            ));
        }
    }
    if let Some(&r) = eq.iter().find(|&&r| congestion[r] == 0) {
        return bad(format!("equilibrium resource {r} has zero congestion"));
    }
    Ok(())
}

/// Partitions `eq` and `opt` (disjoint) into cost-covering pairs.
///
/// Requires `sum_opt (C+1)^M >= sum_eq C^M`, i.e. the owner is stable.
pub fn pms_partition(
    eq: &[ResourceId],
    opt: &[ResourceId],
    congestion: &[u32],
    degree: u32,
) -> Result<Vec<PartitionPair>> {
    validate_input(eq, opt, congestion)?;
    let need = eq_cost(eq, congestion, degree)?;
    let have = cover_cost(opt, congestion, degree)?;
    if have < need {
        return Err(Error::PartitionPrecondition(format!(
            "optimal cover {have} is below equilibrium cost {need}"
        )));
    }

    let mut eq_sorted = eq.to_vec();
    eq_sorted.sort_by_key(|&r| (std::cmp::Reverse(congestion[r]), r));
    let mut opt_sorted = opt.to_vec();
    opt_sorted.sort_by_key(|&r| (congestion[r], r));
    let w: Vec<Cost> = eq_sorted
        .iter()
        .map(|&r| eq_weight(congestion, r, degree))
        .collect::<Result<_>>()?;
    let cap: Vec<Cost> = opt_sorted
        .iter()
        .map(|&r| opt_weight(congestion, r, degree))
        .collect::<Result<_>>()?;

    let runs = greedy(&w, &cap, false)
        .or_else(|| greedy(&w, &cap, true))
        .ok_or_else(|| {
            Error::PartitionPrecondition(
                "optimal resources exhausted before the equilibrium side was covered".into(),
            )
        })?;
    Ok(runs
        .into_iter()
        .map(|(l, ls)| PartitionPair {
            eq_part: eq_sorted[l].to_vec(),
            opt_part: opt_sorted[ls].to_vec(),
        })
        .collect())
}

type Run = (std::ops::Range<usize>, std::ops::Range<usize>);

/// Bucket greedy over item weights `w` (decreasing) and bucket capacities
/// `cap` (increasing). Returns index ranges `(items, buckets)` per pair.
///
/// With `shared` unset a bucket's capacity is spent across the pairs using
/// it. With `shared` set, each pair may count the full capacity of a bucket
/// it shares with its predecessor; this never fails when the total capacity
/// suffices, and is only tried when the first mode gets stuck.
fn greedy(w: &[Cost], cap: &[Cost], shared: bool) -> Option<Vec<Run>> {
    let (k, m) = (w.len(), cap.len());
    let mut runs: Vec<Run> = Vec::new();
    let mut uses = vec![0u8; m];
    let mut s = 0;
    let mut rem = cap[0];
    let mut i = 0;
    while i < k {
        if s >= m {
            return None;
        }
        if shared {
            rem = cap[s];
        }
        if w[i] <= rem {
            let untouched_after = m - s - 1;
            let first = i;
            let mut acc = w[i];
            i += 1;
            while i < k && acc + w[i] <= rem && k - i > untouched_after {
                acc += w[i];
                i += 1;
            }
            runs.push((first..i, s..s + 1));
            uses[s] += 1;
            rem -= acc;
            if uses[s] == 2 || (rem == 0 && !shared) {
                s += 1;
                if s < m {
                    rem = cap[s];
                }
            }
        } else {
            let mut acc = rem;
            let mut q = s;
            while acc < w[i] {
                q += 1;
                if q >= m {
                    return None;
                }
                acc += cap[q];
            }
            for u in &mut uses[s..=q] {
                *u += 1;
            }
            runs.push((i..i + 1, s..q + 1));
            let leftover = acc - w[i];
            i += 1;
            if leftover == 0 && !shared {
                s = q + 1;
                if s < m {
                    rem = cap[s];
                }
            } else {
                s = q;
                rem = leftover;
            }
        }
    }

    // untouched buckets go to a trailing single-resource pair
    let first_unused = uses.iter().rposition(|&u| u > 0).map_or(0, |p| p + 1);
    if first_unused < m {
        if let Some(last) = runs.last_mut() {
            if last.0.len() == 1 {
                last.1.end = m;
            }
        }
    }
    Some(runs)
}

/// Checks the structural guarantees of a partition against its input.
///
/// Returns a description of the first violated property.
pub fn check_partition(
    eq: &[ResourceId],
    opt: &[ResourceId],
    congestion: &[u32],
    degree: u32,
    pairs: &[PartitionPair],
) -> std::result::Result<(), String> {
    let mut covered: Vec<ResourceId> = pairs.iter().flat_map(|p| p.eq_part.iter().copied()).collect();
    covered.sort_unstable();
    let mut expected = eq.to_vec();
    expected.sort_unstable();
    if covered != expected {
        return Err(format!("eq parts {covered:?} do not partition {expected:?}"));
    }
    let mut opt_uses: BTreeMap<ResourceId, usize> = BTreeMap::new();
    for (j, pair) in pairs.iter().enumerate() {
        if pair.opt_part.is_empty() {
            return Err(format!("pair {j} has an empty optimal part"));
        }
        if let Some(r) = pair.opt_part.iter().find(|r| !opt.contains(r)) {
            return Err(format!("pair {j} uses {r}, which is not an optimal resource"));
        }
        let lhs = cover_cost(&pair.opt_part, congestion, degree).map_err(|e| e.to_string())?;
        let rhs = eq_cost(&pair.eq_part, congestion, degree).map_err(|e| e.to_string())?;
        if lhs < rhs {
            return Err(format!("pair {j}: cover {lhs} < cost {rhs}"));
        }
        if pair.eq_part.len() > 1 && pair.opt_part.len() > 1 {
            return Err(format!("pair {j} has several resources on both sides"));
        }
        if pair.eq_part.len() > 1 {
            let top = pair.opt_part[0];
            if let Some(&r) = pair.eq_part.iter().find(|&&r| congestion[r] > congestion[top]) {
                return Err(format!(
                    "pair {j}: single optimal resource {top} is less congested than {r}"
                ));
            }
        }
        for &r in &pair.opt_part {
            *opt_uses.entry(r).or_default() += 1;
        }
        for (k, other) in pairs.iter().enumerate().skip(j + 1) {
            let shared: Vec<_> = pair
                .opt_part
                .iter()
                .filter(|r| other.opt_part.contains(r))
                .collect();
            if shared.len() > 1 {
                return Err(format!(
                    "pairs {j} and {k} share {} optimal resources",
                    shared.len()
                ));
            }
            if k == j + 1 && shared.len() == 1 {
                let boundary = *shared[0];
                if pair.opt_part.last() != Some(&boundary) || other.opt_part.first() != Some(&boundary) {
                    return Err(format!("pairs {j} and {k} overlap away from their boundary"));
                }
            }
        }
    }
    if let Some((r, n)) = opt_uses.iter().find(|(_, &n)| n > 2) {
        return Err(format!("optimal resource {r} appears in {n} pairs"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_eq_resource_spans_two_optimal() {
        // C = [3, 1, 1]; M = 1; 2 + 2 >= 3
        let congestion = [3, 1, 1];
        let pairs = pms_partition(&[0], &[1, 2], &congestion, 1).unwrap();
        assert_eq!(
            pairs,
            vec![PartitionPair {
                eq_part: vec![0],
                opt_part: vec![1, 2]
            }]
        );
        check_partition(&[0], &[1, 2], &congestion, 1, &pairs).unwrap();
    }

    #[test]
    fn several_eq_resources_share_one_optimal() {
        // C = [2, 2, 5]; M = 1; 6 >= 2 + 2 and C_a = 5 >= 2
        let congestion = [2, 2, 5];
        let pairs = pms_partition(&[0, 1], &[2], &congestion, 1).unwrap();
        assert_eq!(
            pairs,
            vec![PartitionPair {
                eq_part: vec![0, 1],
                opt_part: vec![2]
            }]
        );
        check_partition(&[0, 1], &[2], &congestion, 1, &pairs).unwrap();
    }

    #[test]
    fn boundary_resource_is_shared_once() {
        // eq weights 3,3,3; buckets 5,5
        let congestion = [3, 3, 3, 4, 4];
        let pairs = pms_partition(&[0, 1, 2], &[3, 4], &congestion, 1).unwrap();
        check_partition(&[0, 1, 2], &[3, 4], &congestion, 1, &pairs).unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[1].opt_part, vec![3, 4]);
    }

    #[test]
    fn uncovered_input_is_rejected() {
        let congestion = [4, 1];
        let err = pms_partition(&[0], &[1], &congestion, 1).unwrap_err();
        assert!(matches!(err, Error::PartitionPrecondition(_)));
    }

    #[test]
    fn overlapping_input_is_rejected() {
        let congestion = [2, 2];
        assert!(pms_partition(&[0, 1], &[1], &congestion, 1).is_err());
    }

    #[test]
    fn untouched_buckets_join_last_pair() {
        // one heavy eq resource, many light optimal ones beyond what is needed
        let congestion = [2, 5, 6, 7];
        let pairs = pms_partition(&[0], &[1, 2, 3], &congestion, 1).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].opt_part, vec![1, 2, 3]);
    }

    #[test]
    fn two_optimal_resources_always_split_the_player() {
        // used when an equilibrium-side player receives a second optimal resource
        let congestion = [3, 3, 2, 4, 4];
        let pairs = pms_partition(&[0, 1, 2], &[3, 4], &congestion, 2).unwrap();
        check_partition(&[0, 1, 2], &[3, 4], &congestion, 2, &pairs).unwrap();
        assert!(pairs.len() >= 2);
    }
}
