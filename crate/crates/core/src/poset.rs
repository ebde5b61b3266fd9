//! Abstraction of traces into event posets: the first step keeps the
//! influence spans behind each causal relation, the second forgets them and
//! closes the relations into the two precedence orders.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::influence::InfluenceWitness;
use crate::rewrite::Trace;

/// The trace with matchings and mixes forgotten: events, labels, and the
/// enablement/prevention relations still carrying their influence spans.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntermediateStructure {
    /// Rule name per event; events are the trace positions `0..n`.
    pub labels: Vec<String>,
    /// `(i, j, w)`: event `i` enables event `j` through overlap `w`.
    pub pos: Vec<(usize, usize, InfluenceWitness)>,
    /// `(j, i, w)`: event `j` prevents the earlier event `i` through `w`.
    pub neg: Vec<(usize, usize, InfluenceWitness)>,
}

/// Events with labels and two precedence relations. `precedence` and
/// `obstruction` are the generating relations; the reflexive-transitive
/// closures are exposed as `leq` and `proves`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Poset {
    pub labels: Vec<String>,
    /// The strict enabling relation `<` before closure.
    pub precedence: BTreeSet<(usize, usize)>,
    /// The non-enabling relation before closure, oriented from the
    /// prevented (earlier) event to its preventer.
    pub obstruction: BTreeSet<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PosetError {
    #[error("event {0} is not in the poset")]
    EventNotInPoset(usize),
    #[error("relation mentions event {0}, outside the poset")]
    DanglingEvent(usize),
    #[error("the {0} relation has a cycle")]
    Cyclic(&'static str),
}

fn closure(n: usize, gen: &BTreeSet<(usize, usize)>) -> Vec<Vec<bool>> {
    let mut m = vec![vec![false; n]; n];
    for i in 0..n {
        m[i][i] = true;
    }
    for &(a, b) in gen {
        m[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if m[i][k] {
                for j in 0..n {
                    if m[k][j] {
                        m[i][j] = true;
                    }
                }
            }
        }
    }
    m
}

fn acyclic(n: usize, gen: &BTreeSet<(usize, usize)>) -> bool {
    let cl = closure(n, gen);
    gen.iter().all(|&(a, b)| !(cl[b][a] && a != b))
}

impl Poset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn events(&self) -> std::ops::Range<usize> {
        0..self.len()
    }

    pub fn validate(&self) -> Result<(), PosetError> {
        let n = self.len();
        for &(a, b) in self.precedence.iter().chain(self.obstruction.iter()) {
            if a >= n {
                return Err(PosetError::DanglingEvent(a));
            }
            if b >= n {
                return Err(PosetError::DanglingEvent(b));
            }
        }
        if !acyclic(n, &self.precedence) {
            return Err(PosetError::Cyclic("enabling precedence"));
        }
        if !acyclic(n, &self.obstruction) {
            return Err(PosetError::Cyclic("non-enabling precedence"));
        }
        Ok(())
    }

    /// Enabling precedence: the reflexive-transitive closure of `<`.
    pub fn leq(&self, a: usize, b: usize) -> bool {
        closure(self.len(), &self.precedence)[a][b]
    }

    /// Non-enabling precedence: the reflexive-transitive closure of the
    /// obstruction relation.
    pub fn proves(&self, a: usize, b: usize) -> bool {
        closure(self.len(), &self.obstruction)[a][b]
    }

    /// All pairs of the closed enabling precedence.
    pub fn leq_pairs(&self) -> BTreeSet<(usize, usize)> {
        let m = closure(self.len(), &self.precedence);
        pairs_of(&m)
    }

    /// All pairs of the closed non-enabling precedence.
    pub fn proves_pairs(&self) -> BTreeSet<(usize, usize)> {
        let m = closure(self.len(), &self.obstruction);
        pairs_of(&m)
    }

    /// Transitive reduction of the strict enabling relation: the unique
    /// minimal generator of `leq` (the relations are acyclic).
    pub fn reduced_precedence(&self) -> BTreeSet<(usize, usize)> {
        reduce(self.len(), &self.precedence)
    }

    /// Transitive reduction of the strict non-enabling relation.
    pub fn reduced_obstruction(&self) -> BTreeSet<(usize, usize)> {
        reduce(self.len(), &self.obstruction)
    }

    /// The causal past of an event: the sub-poset on its `leq`
    /// predecessors. Also reports the kept original event indices, and
    /// whether a non-enabling edge crosses the cut (such context is lost).
    pub fn causal_past(&self, e: usize) -> Result<CausalPast, PosetError> {
        if e >= self.len() {
            return Err(PosetError::EventNotInPoset(e));
        }
        let keep: Vec<usize> = self.events().filter(|&x| self.leq(x, e)).collect();
        let index_of = |x: usize| keep.iter().position(|&y| y == x);
        let restrict = |rel: &BTreeSet<(usize, usize)>| {
            rel.iter()
                .filter_map(|&(a, b)| Some((index_of(a)?, index_of(b)?)))
                .collect::<BTreeSet<_>>()
        };
        let crossed = self
            .obstruction
            .iter()
            .any(|&(a, b)| index_of(a).is_some() != index_of(b).is_some());
        let poset = Poset {
            labels: keep.iter().map(|&x| self.labels[x].clone()).collect(),
            precedence: restrict(&self.precedence),
            obstruction: restrict(&self.obstruction),
        };
        Ok(CausalPast { poset, events: keep, obstruction_crossed: crossed })
    }
}

fn reduce(n: usize, gen: &BTreeSet<(usize, usize)>) -> BTreeSet<(usize, usize)> {
    let cl = closure(n, gen);
    let strict = |a: usize, b: usize| a != b && cl[a][b];
    let mut out = BTreeSet::new();
    for a in 0..n {
        for b in 0..n {
            if strict(a, b) && !(0..n).any(|k| strict(a, k) && strict(k, b)) {
                out.insert((a, b));
            }
        }
    }
    out
}

fn pairs_of(m: &[Vec<bool>]) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v {
                out.insert((i, j));
            }
        }
    }
    out
}

/// Result of restricting a poset to an event's causal past.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalPast {
    pub poset: Poset,
    /// For each event of the restriction, its index in the original poset.
    pub events: Vec<usize>,
    /// True when a non-enabling edge connects the past to a dropped event.
    pub obstruction_crossed: bool,
}

/// First abstraction step: forget matchings and mixes, keep the labeled
/// events and the span-carrying causal relations.
pub fn abstract_step1(trace: &Trace) -> IntermediateStructure {
    let n = trace.len();
    let labels = trace.transitions.iter().map(|t| t.rule.name.clone()).collect();
    let mut pos = vec![];
    let mut neg = vec![];
    for i in 0..n {
        for j in i + 1..n {
            for w in crate::causality::enabling_witnesses(trace, i, j) {
                pos.push((i, j, w));
            }
            for w in crate::causality::preventing_witnesses(trace, j, i) {
                neg.push((j, i, w));
            }
        }
    }
    IntermediateStructure { labels, pos, neg }
}

/// Second abstraction step: forget the spans, flip prevention into the
/// obstruction relation.
pub fn abstract_step2(a1: &IntermediateStructure) -> Poset {
    Poset {
        labels: a1.labels.clone(),
        precedence: a1.pos.iter().map(|&(i, j, _)| (i, j)).collect(),
        obstruction: a1.neg.iter().map(|&(j, i, _)| (i, j)).collect(),
    }
}

/// Abstract a trace into its event poset.
pub fn abstract_trace(trace: &Trace) -> Poset {
    abstract_step2(&abstract_step1(trace))
}

/// Are two posets isomorphic: is there a label-preserving bijection on
/// events preserving and reflecting both closed precedence relations?
pub fn poset_iso(s1: &Poset, s2: &Poset) -> bool {
    if s1.len() != s2.len() {
        return false;
    }
    let n = s1.len();
    let leq1 = closure(n, &s1.precedence);
    let leq2 = closure(n, &s2.precedence);
    let pr1 = closure(n, &s1.obstruction);
    let pr2 = closure(n, &s2.obstruction);
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn go(
        i: usize,
        n: usize,
        s1: &Poset,
        s2: &Poset,
        leq1: &[Vec<bool>],
        leq2: &[Vec<bool>],
        pr1: &[Vec<bool>],
        pr2: &[Vec<bool>],
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
    ) -> bool {
        if i == n {
            return true;
        }
        for c in 0..n {
            if used[c] || s1.labels[i] != s2.labels[c] {
                continue;
            }
            let ok = (0..i).all(|k| {
                leq1[i][k] == leq2[c][map[k]]
                    && leq1[k][i] == leq2[map[k]][c]
                    && pr1[i][k] == pr2[c][map[k]]
                    && pr1[k][i] == pr2[map[k]][c]
            });
            if !ok {
                continue;
            }
            map[i] = c;
            used[c] = true;
            if go(i + 1, n, s1, s2, leq1, leq2, pr1, pr2, map, used) {
                return true;
            }
            used[c] = false;
        }
        false
    }
    go(0, n, s1, s2, &leq1, &leq2, &pr1, &pr2, &mut map, &mut used)
}

/// One representative per isomorphism class, in order of first occurrence.
pub fn quotient(posets: &[Poset]) -> Vec<Poset> {
    let mut reps: Vec<Poset> = vec![];
    for s in posets {
        if !reps.iter().any(|r| poset_iso(r, s)) {
            reps.push(s.clone());
        }
    }
    reps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poset(labels: &[&str], prec: &[(usize, usize)], obs: &[(usize, usize)]) -> Poset {
        Poset {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            precedence: prec.iter().copied().collect(),
            obstruction: obs.iter().copied().collect(),
        }
    }

    #[test]
    fn closures_are_reflexive_and_transitive() {
        let s = poset(&["a", "b", "c"], &[(0, 1), (1, 2)], &[]);
        assert!(s.leq(0, 0));
        assert!(s.leq(0, 2));
        assert!(!s.leq(2, 0));
        assert!(s.proves(1, 1));
        assert!(!s.proves(0, 1));
    }

    #[test]
    fn validate_catches_cycles_and_dangling_events() {
        let s = poset(&["a", "b"], &[(0, 1), (1, 0)], &[]);
        assert!(matches!(s.validate(), Err(PosetError::Cyclic(_))));
        let s = poset(&["a"], &[(0, 3)], &[]);
        assert!(matches!(s.validate(), Err(PosetError::DanglingEvent(3))));
    }

    #[test]
    fn reduced_precedence_drops_implied_pairs() {
        let s = poset(&["a", "b", "c"], &[(0, 1), (1, 2), (0, 2)], &[]);
        assert_eq!(
            s.reduced_precedence(),
            [(0, 1), (1, 2)].into_iter().collect()
        );
        // Re-closing the reduction recovers the closure.
        let r = Poset { precedence: s.reduced_precedence(), ..s.clone() };
        assert_eq!(r.leq_pairs(), s.leq_pairs());
    }

    #[test]
    fn causal_past_follows_leq_only() {
        let s = poset(&["a", "b", "c"], &[(0, 2)], &[(1, 2)]);
        let past = s.causal_past(2).unwrap();
        assert_eq!(past.events, vec![0, 2]);
        assert!(past.obstruction_crossed);
        assert_eq!(past.poset.labels, vec!["a", "c"]);
        let minimal = s.causal_past(1).unwrap();
        assert_eq!(minimal.events, vec![1]);
        assert!(s.causal_past(9).is_err());
    }

    #[test]
    fn iso_is_label_sensitive() {
        let s1 = poset(&["a", "b"], &[(0, 1)], &[]);
        let s2 = poset(&["b", "a"], &[(1, 0)], &[]);
        let s3 = poset(&["a", "a"], &[(0, 1)], &[]);
        assert!(poset_iso(&s1, &s1));
        assert!(poset_iso(&s1, &s2));
        assert!(!poset_iso(&s1, &s3));
    }

    #[test]
    fn iso_distinguishes_relation_kinds() {
        let s1 = poset(&["a", "b"], &[(0, 1)], &[]);
        let s2 = poset(&["a", "b"], &[], &[(0, 1)]);
        assert!(!poset_iso(&s1, &s2));
    }

    #[test]
    fn quotient_collapses_copies() {
        let s = poset(&["a", "b"], &[(0, 1)], &[]);
        let t = poset(&["b", "a"], &[(1, 0)], &[]);
        let u = poset(&["a", "b"], &[], &[]);
        assert_eq!(quotient(&[s.clone(), t, s.clone(), u]).len(), 2);
    }

    #[test]
    fn empty_trace_abstracts_to_empty_poset() {
        let trace = Trace::new(crate::sitegraph::SiteGraph::empty(), vec![]).unwrap();
        let s = abstract_trace(&trace);
        assert!(s.is_empty());
        assert!(s.precedence.is_empty() && s.obstruction.is_empty());
    }
}
