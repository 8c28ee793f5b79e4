//! Interval-box reasoning over counter valuations.
//!
//! A conjunction of counter predicates is an axis-aligned box of valuations.
//! Totality and shadowing questions reduce to "is this box covered by the
//! union of those boxes", answered by recursive box subtraction.

use super::{Comparator, CounterDecl, CounterPred};

/// Inclusive `(lo, hi)` per counter.
pub(crate) type Region = Vec<(u32, u32)>;

pub(crate) fn full_region(counters: &[CounterDecl]) -> Region {
    counters.iter().map(|c| (0, c.max)).collect()
}

/// Valuations satisfying every predicate, or `None` when unsatisfiable.
pub(crate) fn pred_region(preds: &[CounterPred], counters: &[CounterDecl]) -> Option<Region> {
    let mut r = full_region(counters);
    for p in preds {
        let (lo, hi) = &mut r[p.counter];
        let v = p.value;
        match p.op {
            Comparator::Lt => {
                if v == 0 {
                    return None;
                }
                *hi = (*hi).min(v - 1);
            }
            Comparator::Le => *hi = (*hi).min(v),
            Comparator::Eq => {
                *lo = (*lo).max(v);
                *hi = (*hi).min(v);
            }
            Comparator::Ge => *lo = (*lo).max(v),
            Comparator::Gt => *lo = (*lo).max(v.saturating_add(1)),
        }
        if lo > hi {
            return None;
        }
    }
    Some(r)
}

/// A valuation in `region` outside every box in `cover`, if one exists.
pub(crate) fn uncovered_point(region: &Region, cover: &[Region]) -> Option<Vec<u32>> {
    let Some((first, rest)) = cover.split_first() else {
        return Some(region.iter().map(|(lo, _)| *lo).collect());
    };
    let disjoint = region
        .iter()
        .zip(first)
        .any(|((lo, hi), (alo, ahi))| hi < alo || ahi < lo);
    if disjoint {
        return uncovered_point(region, rest);
    }
    let mut remaining = region.clone();
    for d in 0..remaining.len() {
        let (alo, ahi) = first[d];
        if remaining[d].0 < alo {
            let mut piece = remaining.clone();
            piece[d] = (remaining[d].0, alo - 1);
            if let Some(p) = uncovered_point(&piece, rest) {
                return Some(p);
            }
            remaining[d].0 = alo;
        }
        if remaining[d].1 > ahi {
            let mut piece = remaining.clone();
            piece[d] = (ahi + 1, remaining[d].1);
            if let Some(p) = uncovered_point(&piece, rest) {
                return Some(p);
            }
            remaining[d].1 = ahi;
        }
    }
    None
}
