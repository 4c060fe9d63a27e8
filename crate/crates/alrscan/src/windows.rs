//! Scanning-window families and their membership counts.
//!
//! A [`WindowSet`] resolves every window of a [`WindowSpec`] family to the
//! subjects it contains and caches the pair `(n_B, m_B)` = (subjects, cases).
//! Families of circles centered on the data share structure: all circles at
//! one center are prefixes of the subjects sorted by distance, so a family of
//! nested circles costs one sort per center instead of one scan per window.
//! [`WindowSet::recount_cases`] exploits the same structure to recount every
//! window in one pass per center, which is the hot loop of permutation Monte
//! Carlo.
//!
//! Window construction conventions:
//!
//! * Balls are closed (`dist <= r`), so subjects tied at the boundary radius
//!   are all included and tied k-nn ranks produce duplicate windows, which
//!   are kept: the family size `N` enters the ALR statistic. An explicit
//!   [`WindowSet::dedup_membership`] pass removes duplicates on request.
//! * `knn` centers enumerate distinct locations (sites); ranks enumerate
//!   ordered site distances, rank 1 being the center itself at radius 0.
//! * `all_pairs` centers enumerate data rows (subjects, or tracts for
//!   aggregated data); radii enumerate the distinct distances to the data,
//!   up to the cutoff. With cutoff 0 this yields one zero-radius window per
//!   row, containing exactly the subjects co-located with it.
//! * `grid` centers enumerate a lattice `offset + spacing * Z^d` inside the
//!   domain rectangle (by default requiring the whole circle inside, as when
//!   covering a mapped region), all with one fixed radius.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{AggregatedDataset, PointDataset};

#[derive(Debug, Error)]
pub enum WindowError {
    #[error("invalid window spec: {0}")]
    InvalidSpec(String),
    #[error("window family is empty after filters")]
    EmptyWindowSet,
    #[error("explicit set {set}: subject index {index} out of range (J = {j})")]
    IndexOutOfRange { set: usize, index: usize, j: usize },
    #[error("label vector has length {got}, expected {expected}")]
    LabelLength { got: usize, expected: usize },
    #[error("site value vector has length {got}, expected {expected}")]
    SiteLength { got: usize, expected: usize },
    #[error("window {window} does not align with whole locations")]
    NotSiteAligned { window: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Axis-aligned rectangle, used as the scanning domain of grid families.
#[derive(Debug, Clone)]
pub struct Rect {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// A family of scanning windows, before resolution against a dataset.
#[derive(Debug, Clone)]
pub enum WindowSpec {
    /// Circles of one fixed radius centered on a lattice.
    FixedRadiusGrid {
        radius: f64,
        spacing: f64,
        offset: f64,
        min_subjects: u32,
        /// Scanning domain; data bounding box when absent.
        domain: Option<Rect>,
        /// Keep only centers whose circle lies entirely inside the domain.
        circle_inside: bool,
    },
    /// Circles centered at each distinct location, through its nearest
    /// locations in rank order.
    KnnCircles {
        min_rank: usize,
        max_rank: usize,
        max_radius: Option<f64>,
    },
    /// Circles centered at each data row, one per distinct inter-point
    /// distance up to `max_radius`.
    AllPairsCircles { max_radius: f64 },
    /// Arbitrary subject-index sets.
    ExplicitSets(Vec<Vec<usize>>),
}

impl WindowSpec {
    pub fn grid(radius: f64, spacing: f64, offset: f64, min_subjects: u32) -> Self {
        WindowSpec::FixedRadiusGrid {
            radius,
            spacing,
            offset,
            min_subjects,
            domain: None,
            circle_inside: true,
        }
    }

    pub fn knn(max_rank: usize) -> Self {
        WindowSpec::KnnCircles {
            min_rank: 1,
            max_rank,
            max_radius: None,
        }
    }

    pub fn all_pairs(max_radius: f64) -> Self {
        WindowSpec::AllPairsCircles { max_radius }
    }

    pub fn explicit(sets: Vec<Vec<usize>>) -> Self {
        WindowSpec::ExplicitSets(sets)
    }

    fn validate(&self) -> Result<(), WindowError> {
        match self {
            WindowSpec::FixedRadiusGrid {
                radius, spacing, ..
            } => {
                if !radius.is_finite() || *radius < 0.0 {
                    return Err(WindowError::InvalidSpec("grid radius must be >= 0".into()));
                }
                if !spacing.is_finite() || *spacing <= 0.0 {
                    return Err(WindowError::InvalidSpec("grid spacing must be > 0".into()));
                }
            }
            WindowSpec::KnnCircles {
                min_rank,
                max_rank,
                max_radius,
            } => {
                if *min_rank < 1 || max_rank < min_rank {
                    return Err(WindowError::InvalidSpec(
                        "knn ranks must satisfy 1 <= min_rank <= max_rank".into(),
                    ));
                }
                if let Some(r) = max_radius {
                    if !r.is_finite() || *r < 0.0 {
                        return Err(WindowError::InvalidSpec(
                            "knn max_radius must be >= 0".into(),
                        ));
                    }
                }
            }
            WindowSpec::AllPairsCircles { max_radius } => {
                if !max_radius.is_finite() || *max_radius < 0.0 {
                    return Err(WindowError::InvalidSpec(
                        "all-pairs max_radius must be >= 0".into(),
                    ));
                }
            }
            WindowSpec::ExplicitSets(sets) => {
                if sets.is_empty() {
                    return Err(WindowError::EmptyWindowSet);
                }
            }
        }
        Ok(())
    }
}

/// Distinct locations of a dataset, with the subjects at each.
#[derive(Debug, Clone)]
pub(crate) struct SiteIndex {
    dim: usize,
    coords: Vec<f64>,
    site_offsets: Vec<u32>,
    subject_ids: Vec<u32>,
    site_of_subject: Vec<u32>,
}

impl SiteIndex {
    fn from_points(data: &PointDataset) -> Self {
        let dim = data.dim();
        let j = data.num_subjects();
        let mut key_to_site: HashMap<Vec<u64>, u32> = HashMap::new();
        let mut coords = Vec::new();
        let mut site_of_subject = Vec::with_capacity(j);
        let mut members: Vec<Vec<u32>> = Vec::new();
        for i in 0..j {
            let p = data.point(i);
            let key: Vec<u64> = p.iter().map(|c| c.to_bits()).collect();
            let site = *key_to_site.entry(key).or_insert_with(|| {
                coords.extend_from_slice(p);
                members.push(Vec::new());
                (members.len() - 1) as u32
            });
            site_of_subject.push(site);
            members[site as usize].push(i as u32);
        }
        let mut site_offsets = Vec::with_capacity(members.len() + 1);
        let mut subject_ids = Vec::with_capacity(j);
        site_offsets.push(0);
        for m in &members {
            subject_ids.extend_from_slice(m);
            site_offsets.push(subject_ids.len() as u32);
        }
        SiteIndex {
            dim,
            coords,
            site_offsets,
            subject_ids,
            site_of_subject,
        }
    }

    /// One site per aggregated row; subjects are the expanded population in
    /// row order, cases first within each row.
    fn from_aggregated(agg: &AggregatedDataset) -> Self {
        let dim = agg.dim();
        let q = agg.num_locations();
        let j = agg.total_population() as usize;
        let mut coords = Vec::with_capacity(q * dim);
        let mut site_offsets = Vec::with_capacity(q + 1);
        let mut site_of_subject = Vec::with_capacity(j);
        site_offsets.push(0u32);
        for s in 0..q {
            coords.extend_from_slice(agg.centroid(s));
            let n = agg.populations()[s] as u32;
            let start = *site_offsets.last().unwrap();
            site_offsets.push(start + n);
            site_of_subject.extend(std::iter::repeat(s as u32).take(n as usize));
        }
        SiteIndex {
            dim,
            coords,
            site_offsets,
            subject_ids: (0..j as u32).collect(),
            site_of_subject,
        }
    }

    pub(crate) fn num_sites(&self) -> usize {
        self.site_offsets.len() - 1
    }

    pub(crate) fn num_subjects(&self) -> usize {
        self.site_of_subject.len()
    }

    pub(crate) fn site_coord(&self, s: usize) -> &[f64] {
        &self.coords[s * self.dim..(s + 1) * self.dim]
    }

    pub(crate) fn site_subjects(&self, s: usize) -> &[u32] {
        let (a, b) = (
            self.site_offsets[s] as usize,
            self.site_offsets[s + 1] as usize,
        );
        &self.subject_ids[a..b]
    }

    pub(crate) fn site_size(&self, s: usize) -> u32 {
        self.site_offsets[s + 1] - self.site_offsets[s]
    }

    pub(crate) fn site_of_subject(&self) -> &[u32] {
        &self.site_of_subject
    }

    /// Euclidean distance between two sites. Membership predicates compare
    /// these values directly, so a window's reported radius reproduces its
    /// membership exactly (closed ball, `dist <= radius` in f64).
    fn dist(&self, a: usize, b: usize) -> f64 {
        dist(self.site_coord(a), self.site_coord(b))
    }

    fn dist_to(&self, s: usize, point: &[f64]) -> f64 {
        dist(self.site_coord(s), point)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Where a window came from, for reports and TSV dumps.
#[derive(Debug, Clone)]
pub enum WindowProvenance {
    GridCircle {
        center: Vec<f64>,
        radius: f64,
    },
    KnnCircle {
        center_site: usize,
        rank: usize,
        radius: f64,
    },
    PairCircle {
        center_row: usize,
        radius: f64,
    },
    Explicit {
        id: usize,
    },
}

impl std::fmt::Display for WindowProvenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WindowProvenance::GridCircle { center, radius } => {
                write!(f, "grid circle center=(")?;
                for (i, c) in center.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ") radius={radius}")
            }
            WindowProvenance::KnnCircle {
                center_site,
                rank,
                radius,
            } => write!(
                f,
                "knn circle site={center_site} rank={rank} radius={radius}"
            ),
            WindowProvenance::PairCircle { center_row, radius } => {
                write!(f, "pair circle row={center_row} radius={radius}")
            }
            WindowProvenance::Explicit { id } => write!(f, "explicit set {id}"),
        }
    }
}

#[derive(Debug, Clone)]
enum Group {
    /// Windows are prefixes of `site_order`; `cum_subjects[k]` counts the
    /// subjects in the first k+1 sites.
    SitePrefix {
        site_order: Vec<u32>,
        cum_subjects: Vec<u32>,
    },
    /// Explicit subject membership; `sites` is set when the members are
    /// exactly a union of whole sites.
    Subjects {
        members: Vec<u32>,
        sites: Option<Vec<u32>>,
    },
}

#[derive(Debug, Clone)]
pub struct WindowInfo {
    group: u32,
    /// Number of leading sites of the group order (SitePrefix groups only).
    site_cut: u32,
    n: u32,
    m: u32,
    pub provenance: WindowProvenance,
}

impl WindowInfo {
    /// Subjects in the window.
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Cases in the window under the build-time labels.
    pub fn m(&self) -> u32 {
        self.m
    }
}

/// A resolved, immutable family of scanning windows.
#[derive(Debug, Clone)]
pub struct WindowSet {
    site_index: SiteIndex,
    groups: Vec<Group>,
    windows: Vec<WindowInfo>,
    /// Per group: (site cut, window index), sorted by cut.
    group_windows: Vec<Vec<(u32, u32)>>,
}

/// What the centers of an all-pairs family enumerate.
#[derive(Clone, Copy, PartialEq)]
enum PairCenters {
    /// One center per subject (point data); co-located subjects duplicate.
    Subjects,
    /// One center per location row (aggregated data).
    Sites,
}

/// Builds the window family for subject-level data.
pub fn build_windows(data: &PointDataset, spec: &WindowSpec) -> Result<WindowSet, WindowError> {
    let sites = SiteIndex::from_points(data);
    build_from_sites(sites, spec, data.cases().to_vec(), PairCenters::Subjects)
}

/// Builds the window family for aggregated data; counts are population-level.
pub fn build_windows_aggregated(
    agg: &AggregatedDataset,
    spec: &WindowSpec,
) -> Result<WindowSet, WindowError> {
    let sites = SiteIndex::from_aggregated(agg);
    let mut labels = Vec::with_capacity(agg.total_population() as usize);
    for s in 0..agg.num_locations() {
        let (m, n) = (agg.case_counts()[s], agg.populations()[s]);
        labels.extend((0..n).map(|r| r < m));
    }
    build_from_sites(sites, spec, labels, PairCenters::Sites)
}

/// Per-center distance order over sites, as (distance, site).
fn sorted_site_dist(sites: &SiteIndex, center: usize) -> Vec<(f64, u32)> {
    let q = sites.num_sites();
    let mut order: Vec<(f64, u32)> = (0..q).map(|s| (sites.dist(center, s), s as u32)).collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    order
}

fn cumulative_subjects(sites: &SiteIndex, order: &[(f64, u32)]) -> Vec<u32> {
    let mut cum = Vec::with_capacity(order.len());
    let mut acc = 0u32;
    for &(_, s) in order {
        acc += sites.site_size(s as usize);
        cum.push(acc);
    }
    cum
}

fn build_from_sites(
    sites: SiteIndex,
    spec: &WindowSpec,
    labels: Vec<bool>,
    pair_centers: PairCenters,
) -> Result<WindowSet, WindowError> {
    spec.validate()?;
    let q = sites.num_sites();
    let mut groups: Vec<Group> = Vec::new();
    let mut windows: Vec<WindowInfo> = Vec::new();

    match spec {
        WindowSpec::KnnCircles {
            min_rank,
            max_rank,
            max_radius,
        } => {
            let jmax = (*max_rank).min(q);
            let per_center: Vec<(Group, Vec<(u32, usize, f64)>)> = (0..q)
                .into_par_iter()
                .map(|cs| {
                    let order = sorted_site_dist(&sites, cs);
                    let cum = cumulative_subjects(&sites, &order);
                    let mut wins = Vec::new();
                    for rank in *min_rank..=jmax {
                        let r = order[rank - 1].0;
                        if let Some(lim) = max_radius {
                            if r > *lim {
                                continue;
                            }
                        }
                        // closed ball: include every site tied at the rank radius
                        let cut = order.partition_point(|&(d, _)| d <= r);
                        wins.push((cut as u32, rank, r));
                    }
                    let max_cut = wins.iter().map(|w| w.0).max().unwrap_or(0) as usize;
                    let group = Group::SitePrefix {
                        site_order: order[..max_cut].iter().map(|&(_, s)| s).collect(),
                        cum_subjects: cum[..max_cut].to_vec(),
                    };
                    (group, wins)
                })
                .collect();
            for (cs, (group, wins)) in per_center.into_iter().enumerate() {
                let gid = groups.len() as u32;
                let subject_count = |cut: u32, group: &Group| match group {
                    Group::SitePrefix { cum_subjects, .. } => {
                        if cut == 0 {
                            0
                        } else {
                            cum_subjects[cut as usize - 1]
                        }
                    }
                    _ => unreachable!(),
                };
                for (cut, rank, radius) in &wins {
                    windows.push(WindowInfo {
                        group: gid,
                        site_cut: *cut,
                        n: subject_count(*cut, &group),
                        m: 0,
                        provenance: WindowProvenance::KnnCircle {
                            center_site: cs,
                            rank: *rank,
                            radius: *radius,
                        },
                    });
                }
                groups.push(group);
            }
        }
        WindowSpec::AllPairsCircles { max_radius } => {
            // one group per site; every center row at that site reuses it
            let per_site: Vec<(Group, Vec<(u32, f64)>)> = (0..q)
                .into_par_iter()
                .map(|cs| {
                    let order = sorted_site_dist(&sites, cs);
                    let cum = cumulative_subjects(&sites, &order);
                    let mut cuts = Vec::new();
                    let mut pos = 0;
                    while pos < order.len() && order[pos].0 <= *max_radius {
                        let r = order[pos].0;
                        let cut = order.partition_point(|&(d, _)| d <= r);
                        cuts.push((cut as u32, r));
                        pos = cut;
                    }
                    let max_cut = cuts.last().map(|c| c.0).unwrap_or(0) as usize;
                    let group = Group::SitePrefix {
                        site_order: order[..max_cut].iter().map(|&(_, s)| s).collect(),
                        cum_subjects: cum[..max_cut].to_vec(),
                    };
                    (group, cuts)
                })
                .collect();
            let mut site_group: Vec<u32> = Vec::with_capacity(q);
            let mut site_cuts: Vec<Vec<(u32, f64)>> = Vec::with_capacity(q);
            for (group, cuts) in per_site {
                site_group.push(groups.len() as u32);
                groups.push(group);
                site_cuts.push(cuts);
            }
            let rows: Vec<u32> = match pair_centers {
                PairCenters::Subjects => sites.site_of_subject().to_vec(),
                PairCenters::Sites => (0..q as u32).collect(),
            };
            for (row, &s) in rows.iter().enumerate() {
                let gid = site_group[s as usize];
                let group = &groups[gid as usize];
                for &(cut, radius) in &site_cuts[s as usize] {
                    let n = match group {
                        Group::SitePrefix { cum_subjects, .. } => cum_subjects[cut as usize - 1],
                        _ => unreachable!(),
                    };
                    windows.push(WindowInfo {
                        group: gid,
                        site_cut: cut,
                        n,
                        m: 0,
                        provenance: WindowProvenance::PairCircle {
                            center_row: row,
                            radius,
                        },
                    });
                }
            }
        }
        WindowSpec::FixedRadiusGrid {
            radius,
            spacing,
            offset,
            min_subjects,
            domain,
            circle_inside,
        } => {
            let dim = sites.dim;
            let (mut lo, mut hi) = match domain {
                Some(rect) => {
                    if rect.lo.len() != dim || rect.hi.len() != dim {
                        return Err(WindowError::InvalidSpec(
                            "domain dimension does not match data".into(),
                        ));
                    }
                    (rect.lo.clone(), rect.hi.clone())
                }
                None => {
                    let mut lo = vec![f64::INFINITY; dim];
                    let mut hi = vec![f64::NEG_INFINITY; dim];
                    for s in 0..q {
                        for (k, &c) in sites.site_coord(s).iter().enumerate() {
                            lo[k] = lo[k].min(c);
                            hi[k] = hi[k].max(c);
                        }
                    }
                    (lo, hi)
                }
            };
            if *circle_inside {
                for k in 0..dim {
                    lo[k] += radius;
                    hi[k] -= radius;
                }
            }
            // lattice points offset + spacing * Z inside [lo, hi], per axis
            let mut axes: Vec<Vec<f64>> = Vec::with_capacity(dim);
            for k in 0..dim {
                let mut pts = Vec::new();
                let first = ((lo[k] - offset) / spacing).ceil() as i64;
                let last = ((hi[k] - offset) / spacing).floor() as i64;
                for z in first..=last {
                    let v = offset + spacing * z as f64;
                    if v >= lo[k] && v <= hi[k] {
                        pts.push(v);
                    }
                }
                axes.push(pts);
            }
            let mut centers: Vec<Vec<f64>> = vec![vec![]];
            for axis in &axes {
                let mut next = Vec::with_capacity(centers.len() * axis.len());
                for c in &centers {
                    for &v in axis {
                        let mut c2 = c.clone();
                        c2.push(v);
                        next.push(c2);
                    }
                }
                centers = next;
            }
            if axes.iter().any(|a| a.is_empty()) {
                centers.clear();
            }
            let per_center: Vec<Option<(Group, Vec<f64>, u32)>> = centers
                .into_par_iter()
                .map(|center| {
                    let mut order: Vec<(f64, u32)> = (0..q)
                        .filter_map(|s| {
                            let d = sites.dist_to(s, &center);
                            (d <= *radius).then_some((d, s as u32))
                        })
                        .collect();
                    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                    let cum = cumulative_subjects(&sites, &order);
                    let n = cum.last().copied().unwrap_or(0);
                    if n < *min_subjects {
                        return None;
                    }
                    let group = Group::SitePrefix {
                        site_order: order.iter().map(|&(_, s)| s).collect(),
                        cum_subjects: cum,
                    };
                    Some((group, center, n))
                })
                .collect();
            for item in per_center.into_iter().flatten() {
                let (group, center, n) = item;
                let cut = match &group {
                    Group::SitePrefix { site_order, .. } => site_order.len() as u32,
                    _ => unreachable!(),
                };
                windows.push(WindowInfo {
                    group: groups.len() as u32,
                    site_cut: cut,
                    n,
                    m: 0,
                    provenance: WindowProvenance::GridCircle {
                        center,
                        radius: *radius,
                    },
                });
                groups.push(group);
            }
        }
        WindowSpec::ExplicitSets(sets) => {
            let j = sites.num_subjects();
            for (set_id, set) in sets.iter().enumerate() {
                let mut members: Vec<u32> = Vec::with_capacity(set.len());
                for &idx in set {
                    if idx >= j {
                        return Err(WindowError::IndexOutOfRange {
                            set: set_id,
                            index: idx,
                            j,
                        });
                    }
                    members.push(idx as u32);
                }
                members.sort_unstable();
                members.dedup();
                let site_list = site_alignment(&sites, &members);
                let n = members.len() as u32;
                windows.push(WindowInfo {
                    group: groups.len() as u32,
                    site_cut: 0,
                    n,
                    m: 0,
                    provenance: WindowProvenance::Explicit { id: set_id },
                });
                groups.push(Group::Subjects {
                    members,
                    sites: site_list,
                });
            }
        }
    }

    if windows.is_empty() {
        return Err(WindowError::EmptyWindowSet);
    }
    let group_windows = index_group_windows(groups.len(), &windows);
    let mut ws = WindowSet {
        site_index: sites,
        groups,
        windows,
        group_windows,
    };
    let m = ws.recount_cases(&labels)?;
    for (w, m_b) in ws.windows.iter_mut().zip(m) {
        w.m = m_b;
    }
    Ok(ws)
}

/// Sites covered by `members`, if the set is exactly a union of whole sites.
fn site_alignment(sites: &SiteIndex, members: &[u32]) -> Option<Vec<u32>> {
    let mut covered: Vec<u32> = members
        .iter()
        .map(|&i| sites.site_of_subject()[i as usize])
        .collect();
    covered.sort_unstable();
    covered.dedup();
    let total: u32 = covered.iter().map(|&s| sites.site_size(s as usize)).sum();
    (total as usize == members.len()).then_some(covered)
}

fn index_group_windows(num_groups: usize, windows: &[WindowInfo]) -> Vec<Vec<(u32, u32)>> {
    let mut gw: Vec<Vec<(u32, u32)>> = vec![Vec::new(); num_groups];
    for (widx, w) in windows.iter().enumerate() {
        gw[w.group as usize].push((w.site_cut, widx as u32));
    }
    for list in &mut gw {
        list.sort_unstable();
    }
    gw
}

impl WindowSet {
    /// Number of windows N.
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Number of subjects J of the underlying data.
    pub fn num_subjects(&self) -> usize {
        self.site_index.num_subjects()
    }

    /// Number of distinct locations.
    pub fn num_sites(&self) -> usize {
        self.site_index.num_sites()
    }

    pub fn window(&self, i: usize) -> &WindowInfo {
        &self.windows[i]
    }

    pub fn windows(&self) -> &[WindowInfo] {
        &self.windows
    }

    /// Per-window subject counts n_B.
    pub fn subject_counts(&self) -> Vec<u32> {
        self.windows.iter().map(|w| w.n).collect()
    }

    /// Per-window case counts m_B under the build-time labels.
    pub fn case_counts(&self) -> Vec<u32> {
        self.windows.iter().map(|w| w.m).collect()
    }

    /// Sorted subject indices of one window (materialized on demand).
    pub fn membership(&self, i: usize) -> Vec<u32> {
        let w = &self.windows[i];
        match &self.groups[w.group as usize] {
            Group::Subjects { members, .. } => members.clone(),
            Group::SitePrefix { site_order, .. } => {
                let mut out = Vec::with_capacity(w.n as usize);
                for &s in &site_order[..w.site_cut as usize] {
                    out.extend_from_slice(self.site_index.site_subjects(s as usize));
                }
                out.sort_unstable();
                out
            }
        }
    }

    /// Subjects at each distinct location (for building location-level inputs).
    pub fn site_subjects(&self, s: usize) -> &[u32] {
        self.site_index.site_subjects(s)
    }

    /// Location of each subject, as a site index.
    pub fn site_of_subject(&self) -> &[u32] {
        self.site_index.site_of_subject()
    }

    /// Population of each site.
    pub fn site_populations(&self) -> Vec<u32> {
        (0..self.num_sites())
            .map(|s| self.site_index.site_size(s))
            .collect()
    }

    /// Coordinates of a site.
    pub fn site_coord(&self, s: usize) -> &[f64] {
        self.site_index.site_coord(s)
    }

    /// Recomputes m_B for every window under new labels, without touching
    /// memberships. Pure; safe to call concurrently.
    pub fn recount_cases(&self, labels: &[bool]) -> Result<Vec<u32>, WindowError> {
        let j = self.num_subjects();
        if labels.len() != j {
            return Err(WindowError::LabelLength {
                got: labels.len(),
                expected: j,
            });
        }
        let mut site_case = vec![0u32; self.num_sites()];
        for (i, &lab) in labels.iter().enumerate() {
            if lab {
                site_case[self.site_index.site_of_subject()[i] as usize] += 1;
            }
        }
        Ok(self.sum_prefix(&site_case, |members| {
            members.iter().filter(|&&i| labels[i as usize]).count() as u32
        }))
    }

    /// Per-window sums of an arbitrary per-site value. Every window must be a
    /// union of whole sites.
    pub fn sum_site_values<T>(&self, values: &[T]) -> Result<Vec<T>, WindowError>
    where
        T: Copy + Default + std::ops::AddAssign,
    {
        if values.len() != self.num_sites() {
            return Err(WindowError::SiteLength {
                got: values.len(),
                expected: self.num_sites(),
            });
        }
        for (widx, w) in self.windows.iter().enumerate() {
            if let Group::Subjects { sites: None, .. } = &self.groups[w.group as usize] {
                return Err(WindowError::NotSiteAligned { window: widx });
            }
        }
        Ok(self.sum_prefix(values, |_| unreachable!("checked alignment above")))
    }

    /// Shared prefix walk: sums `values` over each window's sites, using
    /// `subjects_fallback` for non-aligned explicit windows.
    fn sum_prefix<T, F>(&self, values: &[T], subjects_fallback: F) -> Vec<T>
    where
        T: Copy + Default + std::ops::AddAssign,
        F: Fn(&[u32]) -> T,
    {
        let mut out = vec![T::default(); self.windows.len()];
        for (g, group) in self.groups.iter().enumerate() {
            let gw = &self.group_windows[g];
            if gw.is_empty() {
                continue;
            }
            match group {
                Group::SitePrefix { site_order, .. } => {
                    let mut acc = T::default();
                    let mut wi = 0;
                    while wi < gw.len() && gw[wi].0 == 0 {
                        out[gw[wi].1 as usize] = acc;
                        wi += 1;
                    }
                    for (pos, &s) in site_order.iter().enumerate() {
                        acc += values[s as usize];
                        while wi < gw.len() && gw[wi].0 as usize == pos + 1 {
                            out[gw[wi].1 as usize] = acc;
                            wi += 1;
                        }
                    }
                }
                Group::Subjects { members, sites } => {
                    let v = match sites {
                        Some(site_list) => {
                            let mut acc = T::default();
                            for &s in site_list {
                                acc += values[s as usize];
                            }
                            acc
                        }
                        None => subjects_fallback(members),
                    };
                    for &(_, widx) in gw {
                        out[widx as usize] = v;
                    }
                }
            }
        }
        out
    }

    /// Case counts per site under the build-time labels or arbitrary labels.
    pub fn site_case_counts(&self, labels: &[bool]) -> Result<Vec<u32>, WindowError> {
        if labels.len() != self.num_subjects() {
            return Err(WindowError::LabelLength {
                got: labels.len(),
                expected: self.num_subjects(),
            });
        }
        let mut site_case = vec![0u32; self.num_sites()];
        for (i, &lab) in labels.iter().enumerate() {
            if lab {
                site_case[self.site_index.site_of_subject()[i] as usize] += 1;
            }
        }
        Ok(site_case)
    }

    /// Drops windows whose membership duplicates an earlier window's.
    pub fn dedup_membership(mut self) -> Result<Self, WindowError> {
        let mut seen: HashMap<Vec<u32>, ()> = HashMap::new();
        let mut keep: Vec<bool> = Vec::with_capacity(self.windows.len());
        for i in 0..self.windows.len() {
            let members = self.membership(i);
            keep.push(seen.insert(members, ()).is_none());
        }
        let mut idx = 0;
        self.windows.retain(|_| {
            let k = keep[idx];
            idx += 1;
            k
        });
        if self.windows.is_empty() {
            return Err(WindowError::EmptyWindowSet);
        }
        self.group_windows = index_group_windows(self.groups.len(), &self.windows);
        Ok(self)
    }

    /// Writes `window_id, provenance, n, m` rows as TSV.
    pub fn dump_tsv<W: Write>(&self, out: &mut W) -> Result<(), WindowError> {
        writeln!(out, "window\tprovenance\tn\tm")?;
        for (i, w) in self.windows.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{}", i, w.provenance, w.n, w.m)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(coords: Vec<(f64, f64)>, cases: Vec<bool>) -> PointDataset {
        let flat: Vec<f64> = coords.iter().flat_map(|&(x, y)| [x, y]).collect();
        PointDataset::new(2, flat, cases, None).unwrap()
    }

    fn uniform_points(n: usize, seed: u64) -> PointDataset {
        use rand::Rng;
        let mut rng = crate::rng::replicate_rng(seed, 0);
        let coords: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
        let cases: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
        dataset(coords, cases)
    }

    /// O(N*J) reference: membership by direct distance scan (closed ball).
    fn brute_force_members(data: &PointDataset, center: &[f64], radius: f64) -> Vec<u32> {
        (0..data.num_subjects())
            .filter(|&i| super::dist(data.point(i), center) <= radius)
            .map(|i| i as u32)
            .collect()
    }

    #[test]
    fn knn_on_colocated_sites() {
        // 20 sites, 50 subjects each
        let mut coords = Vec::new();
        let mut cases = Vec::new();
        for s in 0..20 {
            for k in 0..50 {
                coords.push((s as f64, 0.0));
                cases.push(k == 0);
            }
        }
        let data = dataset(coords, cases);
        let ws = build_windows(&data, &WindowSpec::knn(10)).unwrap();
        assert_eq!(ws.len(), 200);
        // window (site 0, rank 1) is the zero-radius ball at site 0
        let w = ws.window(0);
        assert_eq!(w.n(), 50);
        assert_eq!(w.m(), 1);
        match &w.provenance {
            WindowProvenance::KnnCircle { rank, radius, .. } => {
                assert_eq!(*rank, 1);
                assert_eq!(*radius, 0.0);
            }
            other => panic!("unexpected provenance {other:?}"),
        }
    }

    #[test]
    fn explicit_blocks() {
        let mut coords = Vec::new();
        for b in 0..3 {
            for _ in 0..1000 {
                coords.push((b as f64, 0.0));
            }
        }
        let cases = vec![false; 3000];
        let data = dataset(coords, cases);
        let sets: Vec<Vec<usize>> = (0..3)
            .map(|b| (b * 1000..(b + 1) * 1000).collect())
            .collect();
        let ws = build_windows(&data, &WindowSpec::explicit(sets)).unwrap();
        assert_eq!(ws.len(), 3);
        for w in ws.windows() {
            assert_eq!(w.n(), 1000);
        }
        // blocks align with whole sites, so site-value sums work
        let sums = ws.sum_site_values(&[1.0f64, 10.0, 100.0]).unwrap();
        assert_eq!(sums, vec![1.0, 10.0, 100.0]);
    }

    #[test]
    fn all_pairs_zero_radius_has_one_window_per_row() {
        let data = uniform_points(40, 17);
        let ws = build_windows(&data, &WindowSpec::all_pairs(0.0)).unwrap();
        assert_eq!(ws.len(), 40);
        for (i, w) in ws.windows().iter().enumerate() {
            assert_eq!(w.n(), 1);
            assert_eq!(ws.membership(i), vec![i as u32]);
        }
    }

    #[test]
    fn all_pairs_zero_radius_with_duplicates_contains_colocated() {
        let data = dataset(
            vec![(0.0, 0.0), (0.0, 0.0), (1.0, 1.0)],
            vec![true, false, false],
        );
        let ws = build_windows(&data, &WindowSpec::all_pairs(0.0)).unwrap();
        // one window per row; co-located rows produce duplicate windows
        assert_eq!(ws.len(), 3);
        assert_eq!(ws.membership(0), vec![0, 1]);
        assert_eq!(ws.membership(1), vec![0, 1]);
        assert_eq!(ws.membership(2), vec![2]);
        let deduped = ws.dedup_membership().unwrap();
        assert_eq!(deduped.len(), 2);
    }

    #[test]
    fn incremental_counts_match_brute_force() {
        let data = uniform_points(200, 3);
        for spec in [
            WindowSpec::knn(7),
            WindowSpec::all_pairs(0.3),
            WindowSpec::grid(0.25, 0.2, 0.1, 1),
        ] {
            let ws = build_windows(&data, &spec).unwrap();
            assert!(!ws.is_empty());
            for (i, w) in ws.windows().iter().enumerate() {
                let (center, radius): (Vec<f64>, f64) = match &w.provenance {
                    WindowProvenance::GridCircle { center, radius } => (center.clone(), *radius),
                    WindowProvenance::KnnCircle {
                        center_site,
                        radius,
                        ..
                    } => (ws.site_coord(*center_site).to_vec(), *radius),
                    WindowProvenance::PairCircle { center_row, radius } => {
                        (data.point(*center_row).to_vec(), *radius)
                    }
                    WindowProvenance::Explicit { .. } => unreachable!(),
                };
                let expect = brute_force_members(&data, &center, radius);
                assert_eq!(ws.membership(i), expect, "spec {spec:?} window {i}");
                assert_eq!(w.n() as usize, expect.len());
            }
        }
    }

    #[test]
    fn knn_counts_nondecreasing_in_rank() {
        let data = uniform_points(120, 11);
        let ws = build_windows(&data, &WindowSpec::knn(12)).unwrap();
        let mut by_site: HashMap<usize, Vec<(usize, u32)>> = HashMap::new();
        for w in ws.windows() {
            if let WindowProvenance::KnnCircle {
                center_site, rank, ..
            } = &w.provenance
            {
                by_site
                    .entry(*center_site)
                    .or_default()
                    .push((*rank, w.n()));
            }
        }
        for (_, mut ranks) in by_site {
            ranks.sort_unstable();
            for pair in ranks.windows(2) {
                assert!(pair[0].1 <= pair[1].1);
            }
        }
    }

    #[test]
    fn recount_matches_build_and_extremes() {
        let data = uniform_points(150, 5);
        let ws = build_windows(&data, &WindowSpec::knn(9)).unwrap();
        let original = ws.recount_cases(data.cases()).unwrap();
        assert_eq!(original, ws.case_counts());
        let none = ws.recount_cases(&vec![false; 150]).unwrap();
        assert!(none.iter().all(|&m| m == 0));
        let all = ws.recount_cases(&vec![true; 150]).unwrap();
        assert_eq!(all, ws.subject_counts());
        assert!(matches!(
            ws.recount_cases(&vec![true; 10]),
            Err(WindowError::LabelLength { .. })
        ));
    }

    #[test]
    fn deterministic_rebuild() {
        let data = uniform_points(80, 23);
        let spec = WindowSpec::all_pairs(0.4);
        let a = build_windows(&data, &spec).unwrap();
        let b = build_windows(&data, &spec).unwrap();
        assert_eq!(a.len(), b.len());
        for i in 0..a.len() {
            assert_eq!(a.membership(i), b.membership(i));
        }
    }

    #[test]
    fn grid_respects_min_subjects_and_domain() {
        let data = dataset(vec![(5.0, 5.0), (5.0, 5.0), (95.0, 95.0)], vec![true; 3]);
        let spec = WindowSpec::FixedRadiusGrid {
            radius: 4.0,
            spacing: 10.0,
            offset: 5.0,
            min_subjects: 2,
            domain: Some(Rect {
                lo: vec![0.0, 0.0],
                hi: vec![100.0, 100.0],
            }),
            circle_inside: true,
        };
        let ws = build_windows(&data, &spec).unwrap();
        // only the (5,5) center keeps >= 2 subjects
        assert_eq!(ws.len(), 1);
        assert_eq!(ws.window(0).n(), 2);
        let too_strict = match spec {
            WindowSpec::FixedRadiusGrid {
                radius,
                spacing,
                offset,
                domain,
                circle_inside,
                ..
            } => WindowSpec::FixedRadiusGrid {
                radius,
                spacing,
                offset,
                min_subjects: 5,
                domain,
                circle_inside,
            },
            _ => unreachable!(),
        };
        assert!(matches!(
            build_windows(&data, &too_strict),
            Err(WindowError::EmptyWindowSet)
        ));
    }

    #[test]
    fn explicit_index_out_of_range() {
        let data = uniform_points(10, 1);
        let err = build_windows(&data, &WindowSpec::explicit(vec![vec![0, 10]])).unwrap_err();
        assert!(matches!(
            err,
            WindowError::IndexOutOfRange { index: 10, .. }
        ));
    }

    #[test]
    fn aggregated_windows_count_population() {
        let agg =
            AggregatedDataset::new(2, vec![0.0, 0.0, 1.0, 0.0], vec![1, 0], vec![10, 5]).unwrap();
        let ws = build_windows_aggregated(&agg, &WindowSpec::all_pairs(2.0)).unwrap();
        // 2 rows x 2 distinct radii each
        assert_eq!(ws.len(), 4);
        let n: Vec<u32> = ws.subject_counts();
        assert_eq!(n, vec![10, 15, 5, 15]);
        assert_eq!(ws.case_counts(), vec![1, 1, 0, 1]);
    }

    #[test]
    fn nested_membership_grows_by_tie_groups() {
        let data = uniform_points(60, 31);
        let ws = build_windows(&data, &WindowSpec::knn(5)).unwrap();
        for s in 0..ws.num_sites().min(8) {
            let mut prev: Option<Vec<u32>> = None;
            for w in 0..ws.len() {
                if let WindowProvenance::KnnCircle { center_site, .. } = ws.window(w).provenance {
                    if center_site != s {
                        continue;
                    }
                    let members = ws.membership(w);
                    if let Some(p) = &prev {
                        assert!(p.iter().all(|x| members.contains(x)));
                    }
                    prev = Some(members);
                }
            }
        }
    }
}
