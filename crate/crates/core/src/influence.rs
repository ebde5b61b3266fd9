//! Static influence between rules: does applying one rule ever create
//! (positive) or destroy (negative) a way to apply another?

use serde::{Deserialize, Serialize};

use crate::catops::{multisum, pullback};
use crate::morphism::{Cospan, Morphism, Span};
use crate::rewrite::Rule;
use crate::sitegraph::SiteGraph;

/// One way the two rules can interfere: a minimal gluing whose overlap is
/// not wholly preserved by the first rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfluenceWitness {
    /// The minimal gluing, with legs from the first rule's side and from
    /// the second rule's left-hand side.
    pub gluing: Cospan,
    /// The shared overlap, with legs into the first rule's side and into
    /// the second rule's left-hand side.
    pub overlap: Span,
}

fn influences(side: &SiteGraph, preserved: &Morphism, l2: &SiteGraph) -> Vec<InfluenceWitness> {
    multisum(side, l2)
        .into_iter()
        .filter_map(|gluing| {
            let overlap = pullback(&Cospan::new(gluing.left.clone(), gluing.right.clone()));
            // The overlap matters only if part of it escapes the preserved
            // interface: pull it back along the rule leg and ask whether
            // anything is lost.
            let h = pullback(&Cospan::new(preserved.clone(), overlap.left.clone()));
            if h.right.is_iso() {
                None
            } else {
                Some(InfluenceWitness { gluing, overlap })
            }
        })
        .collect()
}

/// Witnesses that `r1` can create an application of `r2`: overlaps of r1's
/// right-hand side with r2's left-hand side touching something r1 produced.
pub fn positive_influences(r1: &Rule, r2: &Rule) -> Vec<InfluenceWitness> {
    influences(r1.right(), &r1.span.right, r2.left())
}

/// Witnesses that `r1` can destroy an application of `r2`: overlaps of r1's
/// left-hand side with r2's left-hand side touching something r1 consumes.
pub fn negative_influences(r1: &Rule, r2: &Rule) -> Vec<InfluenceWitness> {
    influences(r1.left(), &r1.span.left, r2.left())
}
