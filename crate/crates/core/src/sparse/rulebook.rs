use rustc_hash::{FxHashMap, FxHashSet};

use crate::site::{offsets, Offset, Site};

/// The `(input i, output j)` pairs with `i - j = k` for every kernel offset `k`
/// and both sites active.
///
/// A submanifold rule is fixed by its output and tap, so each output site holds
/// a bitmask over the taps it receives. Taps are visited in ascending order.
#[derive(Clone, Debug)]
pub struct Rulebook {
    kernel: usize,
    offsets: Vec<Offset>,
    words: usize,
    slots: FxHashMap<Site, usize>,
    outputs: Vec<Site>,
    masks: Vec<u64>,
}

impl Rulebook {
    pub fn empty(kernel: usize) -> Self {
        let offsets = offsets(kernel);
        let words = offsets.len().div_ceil(64).max(1);
        Self { kernel, offsets, words, slots: FxHashMap::default(), outputs: Vec::new(), masks: Vec::new() }
    }

    /// All rules over the active set, as given by `is_active` over `sites`.
    pub fn build(sites: impl IntoIterator<Item = Site>, is_active: impl Fn(Site) -> bool, kernel: usize) -> Self {
        let mut rb = Self::empty(kernel);
        let mut mask = vec![0u64; rb.words];
        for j in sites {
            if rb.scan(j, &is_active, &mut mask) {
                rb.set(j, &mask);
            }
        }
        rb
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    /// Rules for kernel tap `tap`, sorted by `(input, output)`.
    pub fn rules(&self, tap: usize) -> Vec<(Site, Site)> {
        let k = self.offsets[tap];
        let mut v: Vec<(Site, Site)> =
            self.outputs.iter().filter(|&&j| self.contains(tap, j.offset(k), j)).map(|&j| (j.offset(k), j)).collect();
        v.sort_unstable();
        v
    }

    /// Taps feeding output `j`, ascending.
    pub fn taps(&self, j: Site) -> impl Iterator<Item = usize> + '_ {
        let mask = match self.slots.get(&j) {
            Some(&s) => &self.masks[s * self.words..(s + 1) * self.words],
            None => &[][..],
        };
        mask.iter().enumerate().flat_map(|(w, &bits)| {
            let mut b = bits;
            std::iter::from_fn(move || {
                if b == 0 {
                    return None;
                }
                let t = b.trailing_zeros() as usize;
                b &= b - 1;
                Some(w * 64 + t)
            })
        })
    }

    /// Number of rules feeding output `j`.
    pub fn fan_in(&self, j: Site) -> usize {
        match self.slots.get(&j) {
            Some(&s) => self.masks[s * self.words..(s + 1) * self.words].iter().map(|b| b.count_ones() as usize).sum(),
            None => 0,
        }
    }

    /// Output sites with at least one rule, in storage order.
    pub fn outputs(&self) -> &[Site] {
        &self.outputs
    }

    /// Total rule count `N_r`.
    pub fn len(&self) -> usize {
        self.masks.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn contains(&self, tap: usize, input: Site, output: Site) -> bool {
        if tap >= self.offsets.len() || input != output.offset(self.offsets[tap]) {
            return false;
        }
        self.slots.get(&output).is_some_and(|&s| self.masks[s * self.words + tap / 64] >> (tap % 64) & 1 == 1)
    }

    /// Adds every rule touching a newly active `site`, in both directions.
    /// `is_active` must already report `site` as active.
    pub fn activate(&mut self, site: Site, is_active: impl Fn(Site) -> bool) {
        let mut mask = vec![0u64; self.words];
        if self.scan(site, &is_active, &mut mask) {
            self.set(site, &mask);
        }
        for t in 0..self.offsets.len() {
            let output = site.offset(self.offsets[t].neg());
            if output != site && is_active(output) {
                self.update_bit(output, t, true);
            }
        }
    }

    /// Removes every rule touching `site`.
    pub fn deactivate(&mut self, site: Site) {
        self.clear(site);
        for t in 0..self.offsets.len() {
            let output = site.offset(self.offsets[t].neg());
            if output != site {
                self.update_bit(output, t, false);
            }
        }
    }

    fn scan(&self, j: Site, is_active: &impl Fn(Site) -> bool, mask: &mut [u64]) -> bool {
        mask.iter_mut().for_each(|b| *b = 0);
        let mut any = false;
        for (t, &k) in self.offsets.iter().enumerate() {
            if is_active(j.offset(k)) {
                mask[t / 64] |= 1 << (t % 64);
                any = true;
            }
        }
        any
    }

    fn set(&mut self, j: Site, mask: &[u64]) {
        let s = match self.slots.get(&j) {
            Some(&s) => s,
            None => {
                let s = self.outputs.len();
                self.slots.insert(j, s);
                self.outputs.push(j);
                self.masks.resize(self.masks.len() + self.words, 0);
                s
            }
        };
        self.masks[s * self.words..(s + 1) * self.words].copy_from_slice(mask);
    }

    fn update_bit(&mut self, j: Site, tap: usize, on: bool) {
        let bit = 1u64 << (tap % 64);
        match self.slots.get(&j) {
            Some(&s) => {
                let w = &mut self.masks[s * self.words + tap / 64];
                if on {
                    *w |= bit;
                } else {
                    *w &= !bit;
                    if self.masks[s * self.words..(s + 1) * self.words].iter().all(|&b| b == 0) {
                        self.clear(j);
                    }
                }
            }
            None if on => {
                let mut mask = vec![0u64; self.words];
                mask[tap / 64] = bit;
                self.set(j, &mask);
            }
            None => {}
        }
    }

    fn clear(&mut self, j: Site) {
        let Some(s) = self.slots.remove(&j) else { return };
        let last = self.outputs.len() - 1;
        let w = self.words;
        if s != last {
            let moved = self.outputs[last];
            self.outputs[s] = moved;
            self.slots.insert(moved, s);
            self.masks.copy_within(last * w..(last + 1) * w, s * w);
        }
        self.outputs.pop();
        self.masks.truncate(last * w);
    }

    fn mask(&self, j: Site) -> Option<&[u64]> {
        self.slots.get(&j).map(|&s| &self.masks[s * self.words..(s + 1) * self.words])
    }
}

impl PartialEq for Rulebook {
    fn eq(&self, other: &Self) -> bool {
        self.kernel == other.kernel
            && self.outputs.len() == other.outputs.len()
            && self.outputs.iter().all(|&j| self.mask(j) == other.mask(j))
    }
}

impl Eq for Rulebook {}

/// Builds the synchronous rulebook for an explicit active set.
pub fn build_rulebook(active: &[Site], kernel: usize, width: usize, height: usize) -> Rulebook {
    let set: FxHashSet<Site> = active.iter().copied().filter(|s| s.in_bounds(width, height)).collect();
    let mut sites: Vec<Site> = set.iter().copied().collect();
    sites.sort_unstable();
    Rulebook::build(sites, |s| set.contains(&s), kernel)
}
