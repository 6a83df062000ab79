//! Receptive-field and incremental-rulebook propagation for one event update.

use rustc_hash::FxHashSet;

use crate::site::{offsets, Site};

/// One incremental rule: input `input` feeds output `output = input - offset(tap)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    pub tap: usize,
    pub input: Site,
    pub output: Site,
}

/// Propagation state within one resolution stage.
///
/// The receptive field `F_n` is kept as `visited ∪ frontier`: `visited` holds
/// sites whose outgoing rules are already in `rules`, `frontier` the sites
/// reached last step whose rules have not been generated yet.
#[derive(Clone, Debug)]
pub struct UpdateFront {
    frontier: Vec<Site>,
    visited: FxHashSet<Site>,
    visited_list: Vec<Site>,
    rules: Vec<Rule>,
    kernel: Option<usize>,
    newly_active: FxHashSet<Site>,
    newly_inactive: FxHashSet<Site>,
}

impl UpdateFront {
    /// `F_0` is the changed sites that are active or newly inactive; a site that
    /// stayed zero has not changed. The rulebook starts empty.
    pub fn new(
        changed: &[Site],
        is_active: impl Fn(Site) -> bool,
        newly_active: FxHashSet<Site>,
        newly_inactive: FxHashSet<Site>,
    ) -> Self {
        let mut frontier: Vec<Site> =
            changed.iter().copied().filter(|&s| is_active(s) || newly_inactive.contains(&s)).collect();
        frontier.sort_unstable();
        frontier.dedup();
        Self {
            frontier,
            visited: FxHashSet::default(),
            visited_list: Vec::new(),
            rules: Vec::new(),
            kernel: None,
            newly_active,
            newly_inactive,
        }
    }

    pub fn frontier(&self) -> &[Site] {
        &self.frontier
    }

    pub fn visited(&self) -> &[Site] {
        &self.visited_list
    }

    /// Rules accumulated so far, `R_{k,n}`.
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn newly_active(&self) -> &FxHashSet<Site> {
        &self.newly_active
    }

    pub fn newly_inactive(&self) -> &FxHashSet<Site> {
        &self.newly_inactive
    }

    /// `F_n`, sorted.
    pub fn receptive_field(&self) -> Vec<Site> {
        let mut all: Vec<Site> = self.visited_list.iter().chain(&self.frontier).copied().collect();
        all.sort_unstable();
        all
    }

    /// Advances one convolution of size `kernel` over the current active set.
    ///
    /// Only frontier sites generate new rules and new sites; everything reached
    /// from the visited set was produced by earlier steps. When the kernel size
    /// differs from the previous step that reuse is invalid and the step is
    /// evaluated directly from the full receptive field.
    pub fn propagate(&mut self, kernel: usize, is_active: impl Fn(Site) -> bool) {
        if self.kernel.is_some_and(|k| k != kernel) {
            let field = self.receptive_field();
            let (next, rules) = propagate_direct(&field, kernel, &is_active, &self.newly_active, &self.newly_inactive);
            self.visited_list = field;
            self.visited = self.visited_list.iter().copied().collect();
            self.frontier = next.into_iter().filter(|s| !self.visited.contains(s)).collect();
            self.rules = rules;
            self.kernel = Some(kernel);
            return;
        }
        self.kernel = Some(kernel);
        let offs = offsets(kernel);
        for &s in &self.frontier {
            self.visited.insert(s);
        }
        self.visited_list.extend_from_slice(&self.frontier);
        let mut reached = Vec::new();
        for &i in &self.frontier {
            for (tap, &k) in offs.iter().enumerate() {
                let o = Site::new(i.x - k.dx, i.y - k.dy);
                let active = is_active(o);
                if active && !self.newly_active.contains(&o) {
                    self.rules.push(Rule { tap, input: i, output: o });
                }
                if (active || self.newly_inactive.contains(&o)) && !self.visited.contains(&o) {
                    reached.push(o);
                }
            }
        }
        reached.sort_unstable();
        reached.dedup();
        self.frontier = reached;
    }
}

/// Direct evaluation of one propagation step from the full previous field:
/// `F_n = {i - k : i ∈ F_{n-1}, i - k active or newly inactive}` and
/// `R_{k,n} = {(i, i - k) : i ∈ F_{n-1}, i - k active and not newly active}`.
pub fn propagate_direct(
    field: &[Site],
    kernel: usize,
    is_active: impl Fn(Site) -> bool,
    newly_active: &FxHashSet<Site>,
    newly_inactive: &FxHashSet<Site>,
) -> (Vec<Site>, Vec<Rule>) {
    let offs = offsets(kernel);
    let mut next = Vec::new();
    let mut rules = Vec::new();
    for &i in field {
        for (tap, &k) in offs.iter().enumerate() {
            let o = Site::new(i.x - k.dx, i.y - k.dy);
            let active = is_active(o);
            if active || newly_inactive.contains(&o) {
                next.push(o);
            }
            if active && !newly_active.contains(&o) {
                rules.push(Rule { tap, input: i, output: o });
            }
        }
    }
    next.sort_unstable();
    next.dedup();
    rules.sort_unstable();
    (next, rules)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[Site]) -> FxHashSet<Site> {
        v.iter().copied().collect()
    }

    #[test]
    fn fully_active_neighbourhood() {
        let s = Site::new(4, 4);
        let mut f = UpdateFront::new(&[s], |_| true, set(&[]), set(&[]));
        f.propagate(3, |x| x.in_bounds(9, 9));
        assert_eq!(f.receptive_field().len(), 9);
        assert_eq!(f.rules().len(), 9);
        // corner site: only 4 in-bounds neighbours
        let mut f = UpdateFront::new(&[Site::new(0, 0)], |_| true, set(&[]), set(&[]));
        f.propagate(3, |x| x.in_bounds(9, 9));
        assert_eq!(f.receptive_field().len(), 4);
    }

    #[test]
    fn lone_active_site() {
        let s = Site::new(2, 2);
        let mut f = UpdateFront::new(&[s], |_| true, set(&[]), set(&[]));
        f.propagate(3, |x| x == s);
        assert_eq!(f.receptive_field(), vec![s]);
        assert_eq!(f.rules(), &[Rule { tap: 4, input: s, output: s }]);
    }

    #[test]
    fn newly_inactive_still_propagates() {
        let s = Site::new(2, 2);
        let n = Site::new(3, 2);
        let mut f = UpdateFront::new(&[s], |_| true, set(&[]), set(&[s]));
        f.propagate(3, |x| x == n);
        let field = f.receptive_field();
        assert!(field.contains(&n));
        assert!(f.rules().iter().all(|r| r.output != s));
        assert_eq!(f.rules().len(), 1);
    }

    #[test]
    fn newly_active_outputs_get_no_rules() {
        let s = Site::new(2, 2);
        let n = Site::new(2, 3);
        let mut f = UpdateFront::new(&[s], |_| true, set(&[s]), set(&[]));
        f.propagate(3, |x| x == s || x == n);
        assert_eq!(f.rules(), &[Rule { tap: 1, input: s, output: n }]);
        assert_eq!(f.receptive_field(), vec![s, n]);
    }
}
