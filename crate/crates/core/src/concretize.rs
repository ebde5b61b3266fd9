//! Concretization of event posets back into traces: assign influence spans
//! to the reduced relations, then search over linear extensions and
//! matchings for traces whose abstraction gives back exactly the poset.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::influence::{negative_influences, positive_influences, InfluenceWitness};
use crate::morphism::Morphism;
use crate::poset::{abstract_trace, Poset, PosetError};
use crate::rewrite::{apply_dpo, Rule, Trace};
use crate::sitegraph::{iso_canonical, AgentId, Node, SiteGraph, Signature};

/// A trace realizing a poset, with the event each position realizes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concretization {
    pub trace: Trace,
    /// `event_of_position[k]` is the poset event realized by transition `k`.
    pub event_of_position: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConcretizeError {
    #[error("no rule named {0}")]
    UnknownLabel(String),
    #[error("invalid poset: {0}")]
    InvalidPoset(PosetError),
    #[error("the poset admits no concretization")]
    Unconcretizable,
    #[error("search budget exhausted before any concretization was found")]
    BudgetExhausted,
}

/// Search budget: the `POSET_SEARCH_BUDGET` environment variable, or one
/// million steps.
pub fn default_budget() -> u64 {
    std::env::var("POSET_SEARCH_BUDGET")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1_000_000)
}

/// Is this trace a concretization of the poset: does its abstraction match
/// the poset up to a label-preserving event bijection?
pub fn is_concretization(theta: &Trace, s: &Poset) -> bool {
    theta.validate().is_ok() && crate::poset::poset_iso(&abstract_trace(theta), s)
}

/// Where an agent of the evolving trace comes from; stable across replays,
/// unlike raw identifiers of agents created mid-trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Origin {
    /// Synthesized into the initial mixture under this identifier.
    Initial(AgentId),
    /// Created by the transition at this position, as this right-hand-side
    /// agent of its rule.
    Created(usize, AgentId),
}

#[derive(Clone, Debug)]
struct Step {
    event: usize,
    map: BTreeMap<AgentId, Origin>,
}

struct Search<'a> {
    s: &'a Poset,
    sig: &'a Signature,
    rules: Vec<&'a Rule>,
    budget: u64,
    exhausted: bool,
    // Keyed by canonical form to return solutions up to trace iso.
    found: BTreeMap<Vec<(usize, String, SiteGraph)>, Concretization>,
}

impl<'a> Search<'a> {
    fn spend(&mut self) -> bool {
        if self.budget == 0 {
            self.exhausted = true;
            return false;
        }
        self.budget -= 1;
        true
    }

    fn classify(&self, trace: &Trace, id: AgentId) -> Origin {
        if trace.initial.has_agent(id) {
            return Origin::Initial(id);
        }
        for (p, t) in trace.transitions.iter().enumerate() {
            if t.target().has_agent(id) && !t.source().has_agent(id) {
                return Origin::Created(p, t.comatching.preimage(id).expect("created by comatch"));
            }
        }
        unreachable!("agent out of nowhere")
    }

    fn resolve(&self, trace: &Trace, o: Origin) -> Option<AgentId> {
        match o {
            Origin::Initial(id) => Some(id),
            Origin::Created(p, r_agent) => trace.transitions.get(p)?.comatching.apply(r_agent),
        }
    }

    /// Rebuild the whole trace from the synthesized mixture and the chosen
    /// symbolic matchings.
    fn replay(&self, m0: &SiteGraph, steps: &[Step]) -> Option<Trace> {
        let mut trace = Trace { initial: m0.clone(), transitions: vec![] };
        for step in steps {
            let rule = self.rules[step.event];
            let state = trace.final_state().clone();
            let map: BTreeMap<AgentId, AgentId> = step
                .map
                .iter()
                .map(|(&la, &o)| Some((la, self.resolve(&trace, o)?)))
                .collect::<Option<_>>()?;
            let m = Morphism::new(rule.left().clone(), state, map).ok()?;
            if !m.is_mono() {
                return None;
            }
            let t = apply_dpo(rule, &m).ok()?;
            trace.transitions.push(t);
        }
        Some(trace)
    }

    /// Add minimal fresh copies of the pattern's agents to the mixture:
    /// only the sites the pattern mentions, with the pattern's edges where
    /// both endpoints are fresh (bonds reaching existing agents are planned
    /// separately as extensions).
    fn grow(&self, m0: &mut SiteGraph, pattern: &SiteGraph, fresh: &BTreeMap<AgentId, AgentId>) {
        let _ = self.sig;
        for (&pa, &id) in fresh {
            let ty = pattern.agent_type(pa).unwrap().clone();
            m0.add_agent(id, ty);
            for (a, i) in pattern.nodes() {
                if a == pa {
                    m0.add_node(id, i);
                }
            }
        }
        for e in pattern.edges() {
            let (n1, n2) = e.endpoints();
            match (n1, n2) {
                (Node::Site(a, i), Node::Site(b, j)) => {
                    if let (Some(&x), Some(&y)) = (fresh.get(&a), fresh.get(&b)) {
                        m0.add_edge(Node::Site(x, i), Node::Site(y, j));
                    }
                }
                (Node::Site(a, i), Node::Free) | (Node::Free, Node::Site(a, i)) => {
                    if let Some(&x) = fresh.get(&a) {
                        m0.add_edge(Node::Site(x, i), Node::Free);
                    }
                }
                _ => {}
            }
        }
    }

    /// Extend the synthesized mixture so that the pattern embeds at the
    /// chosen agents: missing nodes and edges on initial agents are added
    /// retroactively to the initial mixture (sound because an edge-less
    /// site of an initial agent can never have been touched by a valid
    /// rule). Returns false when the choice is incompatible.
    fn extend(
        &self,
        new_m0: &mut SiteGraph,
        trace: &Trace,
        lhs: &SiteGraph,
        choice: &BTreeMap<AgentId, Option<AgentId>>,
        fresh: &BTreeMap<AgentId, AgentId>,
    ) -> bool {
        let state = trace.final_state();
        // Missing pattern nodes on existing agents.
        for (pa, i) in lhs.nodes() {
            let Some(c) = choice[&pa] else { continue };
            if state.has_node(c, i) {
                continue;
            }
            match self.classify(trace, c) {
                Origin::Initial(id) => {
                    if new_m0.has_node(id, i) {
                        return false; // was deleted along the way
                    }
                    new_m0.add_node(id, i);
                }
                Origin::Created(..) => return false,
            }
        }
        // Pattern edges not yet realized. A site endpoint can host a new
        // initial edge only if it is edge-less both now and initially.
        for e in lhs.edges() {
            let (n1, n2) = e.endpoints();
            let conc = |n: Node| -> Option<(Node, bool)> {
                // (concrete node in initial-mixture coordinates, is_fresh)
                match n {
                    Node::Free => Some((Node::Free, false)),
                    Node::Site(x, i) => match choice[&x] {
                        None => Some((Node::Site(fresh[&x], i), true)),
                        Some(c) => Some((Node::Site(c, i), false)),
                    },
                }
            };
            let (c1, fresh1) = conc(n1).unwrap();
            let (c2, fresh2) = conc(n2).unwrap();
            let site_fresh = |c: Node, f: bool| !matches!(c, Node::Site(..)) || f;
            if site_fresh(c1, fresh1) && site_fresh(c2, fresh2) {
                continue; // grown already
            }
            if !fresh1 && !fresh2 && state.has_edge(crate::sitegraph::Edge::new(c1, c2)) {
                continue;
            }
            // Every site endpoint must be free for extension.
            for &(c, is_fresh) in [(c1, fresh1), (c2, fresh2)].iter() {
                let Node::Site(id, i) = c else { continue };
                if is_fresh {
                    if new_m0.edge_at(Node::Site(id, i)).is_some() {
                        return false;
                    }
                } else {
                    if state.edge_at(Node::Site(id, i)).is_some() {
                        return false;
                    }
                    match self.classify(trace, id) {
                        Origin::Initial(orig) => {
                            if new_m0.edge_at(Node::Site(orig, i)).is_some() {
                                return false;
                            }
                            if !new_m0.has_node(orig, i) {
                                return false;
                            }
                        }
                        Origin::Created(..) => return false,
                    }
                }
            }
            if c1 == Node::Free && c2 == Node::Free {
                return false;
            }
            new_m0.add_edge(c1, c2);
        }
        true
    }

    fn next_id(&self, m0: &SiteGraph, trace: &Trace) -> AgentId {
        let m = trace
            .transitions
            .iter()
            .filter_map(|t| t.target().max_agent_id())
            .chain(m0.max_agent_id())
            .max()
            .map_or(0, |x| x + 1);
        AgentId(m)
    }

    #[allow(clippy::too_many_arguments)]
    fn place(
        &mut self,
        ext: &[usize],
        pos_assign: &BTreeMap<(usize, usize), &InfluenceWitness>,
        neg_assign: &BTreeMap<(usize, usize), &InfluenceWitness>,
        red_pos: &BTreeSet<(usize, usize)>,
        red_neg: &BTreeSet<(usize, usize)>,
        k: usize,
        m0: &SiteGraph,
        steps: &mut Vec<Step>,
    ) {
        if self.exhausted {
            return;
        }
        let trace = match self.replay(m0, steps) {
            Some(t) => t,
            None => return,
        };
        if k == ext.len() {
            self.check_solution(ext, trace);
            return;
        }
        let event = ext[k];
        let rule = self.rules[event];
        let pos_of = |e: usize| ext.iter().position(|&x| x == e).unwrap();

        // Pins: agents of the left-hand side forced by the spans assigned
        // to the incoming relation edges.
        let mut pins: BTreeMap<AgentId, AgentId> = BTreeMap::new();
        let mut consistent = true;
        let mut pin = |la: AgentId, concrete: Option<AgentId>, consistent: &mut bool| {
            match concrete {
                Some(c) => {
                    if *pins.entry(la).or_insert(c) != c {
                        *consistent = false;
                    }
                }
                None => *consistent = false,
            }
        };
        for &(p, e) in red_pos {
            if e != event {
                continue;
            }
            let w = pos_assign[&(p, e)];
            let t_p = &trace.transitions[pos_of(p)];
            for o in w.overlap.apex().agent_ids() {
                let la = w.overlap.right.apply(o).unwrap();
                let concrete = t_p.comatching.apply(w.overlap.left.apply(o).unwrap());
                pin(la, concrete, &mut consistent);
            }
        }
        for &(p, e) in red_neg {
            // `event` prevents the earlier event `p`: their matchings share
            // the overlap.
            if e != event {
                continue;
            }
            let w = neg_assign[&(p, e)];
            let t_p = &trace.transitions[pos_of(p)];
            for o in w.overlap.apex().agent_ids() {
                let la = w.overlap.left.apply(o).unwrap();
                let concrete = t_p.matching.apply(w.overlap.right.apply(o).unwrap());
                pin(la, concrete, &mut consistent);
            }
        }
        if !consistent {
            return;
        }
        // Pinned agents must still be alive.
        let state = trace.final_state();
        if pins.values().any(|&c| !state.has_agent(c)) {
            return;
        }

        let lhs = rule.left();
        let agents: Vec<AgentId> = lhs.agent_ids().collect();
        let mut choice: BTreeMap<AgentId, Option<AgentId>> = BTreeMap::new(); // None = fresh
        self.assign(
            ext, pos_assign, neg_assign, red_pos, red_neg, k, m0, steps, &pins, lhs, &agents, 0,
            &mut choice, &trace,
        );
    }

    /// Extend the matching choice agent by agent; `None` marks an agent to
    /// be synthesized into the initial mixture.
    #[allow(clippy::too_many_arguments)]
    fn assign(
        &mut self,
        ext: &[usize],
        pos_assign: &BTreeMap<(usize, usize), &InfluenceWitness>,
        neg_assign: &BTreeMap<(usize, usize), &InfluenceWitness>,
        red_pos: &BTreeSet<(usize, usize)>,
        red_neg: &BTreeSet<(usize, usize)>,
        k: usize,
        m0: &SiteGraph,
        steps: &mut Vec<Step>,
        pins: &BTreeMap<AgentId, AgentId>,
        lhs: &SiteGraph,
        agents: &[AgentId],
        idx: usize,
        choice: &mut BTreeMap<AgentId, Option<AgentId>>,
        trace: &Trace,
    ) {
        if self.exhausted {
            return;
        }
        if idx == agents.len() {
            if !self.spend() {
                return;
            }
            // Synthesize the fresh agents, extend the mixture so the
            // pattern embeds, then try the step.
            let fresh_agents: Vec<AgentId> =
                agents.iter().copied().filter(|a| choice[a].is_none()).collect();
            let mut new_m0 = m0.clone();
            let mut fresh = BTreeMap::new();
            let mut next = self.next_id(m0, trace);
            for a in &fresh_agents {
                fresh.insert(*a, next);
                next = AgentId(next.0 + 1);
            }
            self.grow(&mut new_m0, lhs, &fresh);
            if !self.extend(&mut new_m0, trace, lhs, choice, &fresh) {
                return;
            }
            let map: BTreeMap<AgentId, Origin> = agents
                .iter()
                .map(|&a| {
                    let o = match choice[&a] {
                        Some(c) => self.classify(trace, c),
                        None => Origin::Initial(fresh[&a]),
                    };
                    (a, o)
                })
                .collect();
            steps.push(Step { event: ext[k], map });
            self.place(ext, pos_assign, neg_assign, red_pos, red_neg, k + 1, &new_m0, steps);
            steps.pop();
            return;
        }
        let a = agents[idx];
        let ty = lhs.agent_type(a).unwrap();
        let state = trace.final_state();
        let mut options: Vec<Option<AgentId>> = vec![];
        if let Some(&c) = pins.get(&a) {
            options.push(Some(c));
        } else {
            for (c, cty) in state.agents() {
                if cty == ty {
                    options.push(Some(c));
                }
            }
            options.push(None);
        }
        'outer: for opt in options {
            if let Some(c) = opt {
                // Injectivity.
                if choice.values().any(|&v| v == Some(c)) {
                    continue;
                }
                // Prune sites whose current edge contradicts the pattern
                // outright (full validation happens in `extend` and the
                // replay).
                for (pa, i) in lhs.nodes() {
                    if pa != a {
                        continue;
                    }
                    let want = lhs.edge_at(Node::Site(pa, i));
                    let have = state.edge_at(Node::Site(c, i));
                    match (want, have) {
                        (Some(w), Some(h)) => {
                            let wf = w.other(Node::Site(pa, i)) == Some(Node::Free);
                            let hf = h.other(Node::Site(c, i)) == Some(Node::Free);
                            if wf != hf {
                                continue 'outer;
                            }
                        }
                        (Some(_), None) | (None, _) => {}
                    }
                }
            }
            choice.insert(a, opt);
            self.assign(
                ext, pos_assign, neg_assign, red_pos, red_neg, k, m0, steps, pins, lhs, agents,
                idx + 1, choice, trace,
            );
            choice.remove(&a);
            if self.exhausted {
                return;
            }
        }
    }

    fn check_solution(&mut self, ext: &[usize], trace: Trace) {
        let abs = abstract_trace(&trace);
        // Transport the abstraction through the linear extension and demand
        // exactly the poset's closed relations.
        let to_event = |(a, b): (usize, usize)| (ext[a], ext[b]);
        let leq: BTreeSet<_> = abs.leq_pairs().into_iter().map(to_event).collect();
        let proves: BTreeSet<_> = abs.proves_pairs().into_iter().map(to_event).collect();
        if leq != self.s.leq_pairs() || proves != self.s.proves_pairs() {
            return;
        }
        let key: Vec<(usize, String, SiteGraph)> = (0..=trace.len())
            .map(|i| {
                let label = if i < trace.len() {
                    trace.transitions[i].rule.name.clone()
                } else {
                    String::new()
                };
                (if i < ext.len() { ext[i] } else { usize::MAX }, label, iso_canonical(trace.state(i)).0)
            })
            .collect();
        self.found.entry(key).or_insert(Concretization {
            trace,
            event_of_position: ext.to_vec(),
        });
    }
}

fn linear_extensions(
    n: usize,
    order: &BTreeSet<(usize, usize)>,
    budget: &mut u64,
    exhausted: &mut bool,
) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut placed = vec![false; n];
    let mut cur = vec![];
    fn go(
        n: usize,
        order: &BTreeSet<(usize, usize)>,
        placed: &mut Vec<bool>,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        budget: &mut u64,
        exhausted: &mut bool,
    ) {
        if *exhausted {
            return;
        }
        if cur.len() == n {
            if *budget == 0 {
                *exhausted = true;
                return;
            }
            *budget -= 1;
            out.push(cur.clone());
            return;
        }
        for e in 0..n {
            if placed[e] {
                continue;
            }
            if order.iter().any(|&(a, b)| b == e && !placed[a] && a != e) {
                continue;
            }
            placed[e] = true;
            cur.push(e);
            go(n, order, placed, cur, out, budget, exhausted);
            cur.pop();
            placed[e] = false;
        }
    }
    go(n, order, &mut placed, &mut cur, &mut out, budget, exhausted);
    out
}

/// Created agents of the left foot: overlap agents whose image is not
/// preserved by the rule (positive witnesses only).
fn created_agents(w: &InfluenceWitness, producer: &Rule) -> BTreeSet<AgentId> {
    let preserved: BTreeSet<AgentId> =
        producer.interface().agent_ids().map(|a| producer.span.right.apply(a).unwrap()).collect();
    w.overlap
        .apex()
        .agent_ids()
        .filter(|&o| !preserved.contains(&w.overlap.left.apply(o).unwrap()))
        .map(|o| w.overlap.right.apply(o).unwrap())
        .collect()
}

/// Concretize a poset against a rule set: all traces (up to iso) whose
/// abstraction is exactly the poset, together with their event maps.
pub fn concretize(
    s: &Poset,
    sig: &Signature,
    rules: &[Rule],
    budget: u64,
) -> Result<Vec<Concretization>, ConcretizeError> {
    s.validate().map_err(ConcretizeError::InvalidPoset)?;
    let rule_of: Vec<&Rule> = s
        .labels
        .iter()
        .map(|l| {
            rules
                .iter()
                .find(|r| &r.name == l)
                .ok_or_else(|| ConcretizeError::UnknownLabel(l.clone()))
        })
        .collect::<Result<_, _>>()?;
    if s.is_empty() {
        return Ok(vec![Concretization {
            trace: Trace { initial: SiteGraph::empty(), transitions: vec![] },
            event_of_position: vec![],
        }]);
    }

    let red_pos = s.reduced_precedence();
    let red_neg = s.reduced_obstruction();

    // Candidate spans per relation edge; an edge with none is fatal.
    let mut pos_options: BTreeMap<(usize, usize), Vec<InfluenceWitness>> = BTreeMap::new();
    for &(i, j) in &red_pos {
        let ws = positive_influences(rule_of[i], rule_of[j]);
        if ws.is_empty() {
            return Err(ConcretizeError::Unconcretizable);
        }
        pos_options.insert((i, j), ws);
    }
    let mut neg_options: BTreeMap<(usize, usize), Vec<InfluenceWitness>> = BTreeMap::new();
    for &(i, j) in &red_neg {
        // i is prevented by the later j.
        let ws = negative_influences(rule_of[j], rule_of[i]);
        if ws.is_empty() {
            return Err(ConcretizeError::Unconcretizable);
        }
        neg_options.insert((i, j), ws);
    }

    let union: BTreeSet<(usize, usize)> = red_pos.union(&red_neg).copied().collect();
    let mut budget = budget;
    let mut exhausted = false;
    let exts = linear_extensions(s.len(), &union, &mut budget, &mut exhausted);
    if exts.is_empty() && !exhausted {
        return Err(ConcretizeError::Unconcretizable);
    }

    let mut search = Search {
        s,
        sig,
        rules: rule_of,
        budget,
        exhausted,
        found: BTreeMap::new(),
    };

    // Enumerate global span assignments for the positive edges, filtered by
    // producer uniqueness: no two predecessors of an event may create the
    // same piece of its precondition.
    let pos_edges: Vec<(usize, usize)> = pos_options.keys().copied().collect();
    let neg_edges: Vec<(usize, usize)> = neg_options.keys().copied().collect();
    let mut pos_pick: Vec<usize> = vec![0; pos_edges.len()];
    let mut neg_pick: Vec<usize> = vec![0; neg_edges.len()];
    loop {
        // Producer-uniqueness filter on the current positive assignment.
        let assignment: BTreeMap<(usize, usize), &InfluenceWitness> = pos_edges
            .iter()
            .enumerate()
            .map(|(x, &e)| (e, &pos_options[&e][pos_pick[x]]))
            .collect();
        let mut consistent = true;
        'uniq: for &(_, j) in &pos_edges {
            let preds: Vec<usize> =
                pos_edges.iter().filter(|&&(_, jj)| jj == j).map(|&(i, _)| i).collect();
            for (x, &p1) in preds.iter().enumerate() {
                for &p2 in &preds[x + 1..] {
                    let c1 = created_agents(assignment[&(p1, j)], search.rules[p1]);
                    let c2 = created_agents(assignment[&(p2, j)], search.rules[p2]);
                    if c1.intersection(&c2).next().is_some() {
                        consistent = false;
                        break 'uniq;
                    }
                }
            }
        }
        if consistent {
            loop {
                let neg_assignment: BTreeMap<(usize, usize), &InfluenceWitness> = neg_edges
                    .iter()
                    .enumerate()
                    .map(|(x, &e)| (e, &neg_options[&e][neg_pick[x]]))
                    .collect();
                for ext in &exts {
                    let mut steps = vec![];
                    search.place(
                        ext,
                        &assignment,
                        &neg_assignment,
                        &red_pos,
                        &red_neg,
                        0,
                        &SiteGraph::empty(),
                        &mut steps,
                    );
                }
                // Advance the negative picks.
                let mut x = 0;
                loop {
                    if x == neg_edges.len() {
                        break;
                    }
                    neg_pick[x] += 1;
                    if neg_pick[x] < neg_options[&neg_edges[x]].len() {
                        break;
                    }
                    neg_pick[x] = 0;
                    x += 1;
                }
                if x == neg_edges.len() {
                    break;
                }
            }
        }
        // Advance the positive picks.
        let mut x = 0;
        loop {
            if x == pos_edges.len() {
                break;
            }
            pos_pick[x] += 1;
            if pos_pick[x] < pos_options[&pos_edges[x]].len() {
                break;
            }
            pos_pick[x] = 0;
            x += 1;
        }
        if x == pos_edges.len() {
            break;
        }
        if search.exhausted {
            break;
        }
    }

    let solutions: Vec<Concretization> = search.found.into_values().collect();
    if solutions.is_empty() {
        if search.exhausted {
            Err(ConcretizeError::BudgetExhausted)
        } else {
            Err(ConcretizeError::Unconcretizable)
        }
    } else {
        Ok(solutions)
    }
}
