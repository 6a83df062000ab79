use crate::real::{close, Real};
use crate::representation::Representation;
use crate::site::Site;

const NONE: u32 = u32::MAX;

/// Activations stored only at active sites.
///
/// Sites map, through a dense index grid, to rows of two contiguous
/// `rows x channels` matrices holding the pre-activation and activation values. Queries at inactive sites read as zero.
#[derive(Clone, Debug)]
pub struct SparseFeatureMap<T> {
    width: usize,
    height: usize,
    channels: usize,
    index: Vec<u32>,
    sites: Vec<Site>,
    pre: Vec<T>,
    act: Vec<T>,
}

impl<T: Real> SparseFeatureMap<T> {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::with_capacity(width, height, channels, 0)
    }

    /// Empty map with room for `sites` active sites.
    pub fn with_capacity(width: usize, height: usize, channels: usize, sites: usize) -> Self {
        Self {
            width,
            height,
            channels,
            index: vec![NONE; width * height],
            sites: Vec::with_capacity(sites),
            pre: Vec::with_capacity(sites * channels),
            act: Vec::with_capacity(sites * channels),
        }
    }

    #[inline]
    fn cell(&self, site: Site) -> Option<usize> {
        site.in_bounds(self.width, self.height).then(|| site.linear(self.width))
    }

    /// Input-layer map: the non-zero pixels of `rep`, with pre-activation equal to activation.
    pub fn from_representation(rep: &Representation) -> Self {
        let mut map = Self::new(rep.width(), rep.height(), rep.channels());
        let mut row = vec![T::zero(); rep.channels()];
        for site in rep.active_sites() {
            for (r, &v) in row.iter_mut().zip(rep.at(site)) {
                *r = T::from_f32(v);
            }
            map.insert(site, &row, &row);
        }
        map
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    #[inline]
    pub fn contains(&self, site: Site) -> bool {
        self.row(site).is_some()
    }

    #[inline]
    pub fn row(&self, site: Site) -> Option<usize> {
        let r = self.index[self.cell(site)?];
        (r != NONE).then_some(r as usize)
    }

    /// Active sites in storage order.
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn sorted_sites(&self) -> Vec<Site> {
        let mut s = self.sites.clone();
        s.sort_unstable();
        s
    }

    #[inline]
    pub fn pre_row(&self, row: usize) -> &[T] {
        &self.pre[row * self.channels..(row + 1) * self.channels]
    }

    #[inline]
    pub fn act_row(&self, row: usize) -> &[T] {
        &self.act[row * self.channels..(row + 1) * self.channels]
    }

    #[inline]
    pub fn pre_row_mut(&mut self, row: usize) -> &mut [T] {
        &mut self.pre[row * self.channels..(row + 1) * self.channels]
    }

    #[inline]
    pub fn act_row_mut(&mut self, row: usize) -> &mut [T] {
        &mut self.act[row * self.channels..(row + 1) * self.channels]
    }

    /// Both rows of one site, pre-activation mutable and activation mutable.
    pub fn rows_mut(&mut self, row: usize) -> (&mut [T], &mut [T]) {
        let c = self.channels;
        (&mut self.pre[row * c..(row + 1) * c], &mut self.act[row * c..(row + 1) * c])
    }

    pub fn act_at(&self, site: Site) -> Option<&[T]> {
        self.row(site).map(|r| self.act_row(r))
    }

    pub fn pre_at(&self, site: Site) -> Option<&[T]> {
        self.row(site).map(|r| self.pre_row(r))
    }

    /// Copies the activation at `site` into `out`, zero-filling when inactive.
    pub fn act_or_zero(&self, site: Site, out: &mut [T]) {
        match self.act_at(site) {
            Some(v) => out.copy_from_slice(v),
            None => out.iter_mut().for_each(|v| *v = T::zero()),
        }
    }

    /// Inserts or overwrites a site and returns its row.
    pub fn insert(&mut self, site: Site, pre: &[T], act: &[T]) -> usize {
        debug_assert_eq!(pre.len(), self.channels);
        assert!(site.in_bounds(self.width, self.height), "site {site} outside the map");
        if let Some(r) = self.row(site) {
            self.pre_row_mut(r).copy_from_slice(pre);
            self.act_row_mut(r).copy_from_slice(act);
            return r;
        }
        let r = self.sites.len();
        self.index[site.linear(self.width)] = r as u32;
        self.sites.push(site);
        self.pre.extend_from_slice(pre);
        self.act.extend_from_slice(act);
        r
    }

    /// Deactivates a site. Returns whether it was active.
    pub fn remove(&mut self, site: Site) -> bool {
        let Some(r) = self.row(site) else { return false };
        self.index[site.linear(self.width)] = NONE;
        let last = self.sites.len() - 1;
        let c = self.channels;
        if r != last {
            let moved = self.sites[last];
            self.sites[r] = moved;
            self.index[moved.linear(self.width)] = r as u32;
            self.pre.copy_within(last * c..(last + 1) * c, r * c);
            self.act.copy_within(last * c..(last + 1) * c, r * c);
        }
        self.sites.pop();
        self.pre.truncate(last * c);
        self.act.truncate(last * c);
        true
    }

    /// Dense `(y, x, c)` activation grid with zeros at inactive sites.
    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.width * self.height * self.channels];
        for (r, s) in self.sites.iter().enumerate() {
            let i = s.linear(self.width) * self.channels;
            out[i..i + self.channels].copy_from_slice(self.act_row(r));
        }
        out
    }

    /// Compares active sets exactly and values within tolerance; describes the
    /// first mismatch found.
    pub fn compare(&self, other: &Self, rel: f64, abs: f64) -> Result<(), String> {
        if (self.width, self.height, self.channels) != (other.width, other.height, other.channels) {
            return Err(format!(
                "shape {}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            ));
        }
        if self.len() != other.len() {
            return Err(format!("{} active sites vs {}", self.len(), other.len()));
        }
        for (r, &s) in self.sites.iter().enumerate() {
            let Some(o) = other.row(s) else {
                return Err(format!("site {s} active on one side only"));
            };
            for (what, a, b) in [("pre", self.pre_row(r), other.pre_row(o)), ("act", self.act_row(r), other.act_row(o))] {
                for (c, (x, y)) in a.iter().zip(b).enumerate() {
                    if !close(x.as_f64(), y.as_f64(), rel, abs) {
                        return Err(format!("{what} at {s} channel {c}: {x} vs {y}"));
                    }
                }
            }
        }
        Ok(())
    }
}
