//! Combinatorial surface data: ideal triangulations with spiraling closed
//! leaves, cusps, pants decompositions, and curve classes given as crossing
//! words.
//!
//! A triangle is an ordered, positively oriented triple of sides; each side
//! names an isolated leaf together with the coorientation the triangle sees.
//! Closed leaves never bound a triangle side; isolated leaves spiral onto
//! them, recorded per side as a cyclic sequence of leaf ends plus a sign.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid schema: {0}")]
    Invalid(String),
    #[error("leaf {0} is not a closed leaf")]
    NotClosedLeaf(u32),
    #[error("bad curve word: {0}")]
    BadWord(String),
    #[error("invalid pants data: {0}")]
    InvalidPants(String),
    #[error("peripheral curve")]
    PeripheralCurve,
    #[error("unsupported schema: {0}")]
    UnsupportedSchema(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafKind {
    Isolated,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Leaf {
    pub id: u32,
    pub kind: LeafKind,
}

/// Which coorientation of an isolated leaf a triangle side uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Co {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Co {
    pub fn flip(self) -> Co {
        match self {
            Co::Plus => Co::Minus,
            Co::Minus => Co::Plus,
        }
    }
}

/// A half-edge: one coorientation of an isolated leaf.
pub type HalfEdge = (u32, Co);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideRef {
    pub leaf: u32,
    pub co: Co,
}

/// One of the two ends of an isolated leaf. End 0 is the tail of the `+`
/// half-edge (equivalently the head of the `-` half-edge), end 1 the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafEnd {
    pub leaf: u32,
    pub end: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiralSide {
    pub cycle: Vec<LeafEnd>,
    pub sigma: i8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiralData {
    pub leaf: u32,
    pub a: SpiralSide,
    pub b: SpiralSide,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cusp {
    pub ends: Vec<LeafEnd>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriangulationSchema {
    pub leaves: Vec<Leaf>,
    pub triangles: Vec<[SideRef; 3]>,
    pub spirals: Vec<SpiralData>,
    pub cusps: Vec<Cusp>,
    pub genus: u32,
}

/// Side of a closed leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveSide {
    A,
    B,
}

impl CurveSide {
    pub fn other(self) -> CurveSide {
        match self {
            CurveSide::A => CurveSide::B,
            CurveSide::B => CurveSide::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Turn {
    L,
    R,
}

impl Turn {
    pub fn other(self) -> Turn {
        match self {
            Turn::L => Turn::R,
            Turn::R => Turn::L,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsoCrossing {
    pub leaf: u32,
    pub turn: Turn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedCrossing {
    pub leaf: u32,
    pub exit: LeafEnd,
    pub wraps: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Crossing {
    Iso(IsoCrossing),
    Closed(ClosedCrossing),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveClass {
    pub word: Vec<Crossing>,
}

impl CurveClass {
    pub fn from_json(s: &str) -> Result<Self, SchemaError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Convenience constructor for isolated-leaf crossing words.
    pub fn iso(entries: &[(u32, Turn)]) -> Self {
        CurveClass {
            word: entries
                .iter()
                .map(|&(leaf, turn)| Crossing::Iso(IsoCrossing { leaf, turn }))
                .collect(),
        }
    }
}

/// A corner of a triangle: `(tri, i)` is the corner at vertex `i`, between
/// side `i-1` (incoming) and side `i` (outgoing).
pub type Corner = (usize, usize);

/// Derived incidence data for a valid schema.
#[derive(Debug, Clone)]
pub struct Cells {
    /// half-edge -> (triangle, side index)
    pub side_loc: BTreeMap<HalfEdge, (usize, usize)>,
    /// Corner orbits around ideal vertices, each a cyclic corner sequence.
    pub orbits: Vec<Vec<Corner>>,
    /// Leaf ends met along each orbit (outgoing-side tail ends, in order).
    pub orbit_ends: Vec<Vec<LeafEnd>>,
}

impl TriangulationSchema {
    pub fn from_json(s: &str) -> Result<Self, SchemaError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn leaf(&self, id: u32) -> Option<&Leaf> {
        self.leaves.iter().find(|l| l.id == id)
    }

    pub fn is_closed(&self, id: u32) -> bool {
        matches!(self.leaf(id), Some(l) if l.kind == LeafKind::Closed)
    }

    pub fn isolated_leaves(&self) -> impl Iterator<Item = u32> + '_ {
        self.leaves
            .iter()
            .filter(|l| l.kind == LeafKind::Isolated)
            .map(|l| l.id)
    }

    pub fn closed_leaves(&self) -> impl Iterator<Item = u32> + '_ {
        self.leaves
            .iter()
            .filter(|l| l.kind == LeafKind::Closed)
            .map(|l| l.id)
    }

    pub fn spiral(&self, gamma: u32) -> Result<&SpiralData, SchemaError> {
        self.spirals
            .iter()
            .find(|s| s.leaf == gamma)
            .ok_or(SchemaError::NotClosedLeaf(gamma))
    }

    pub fn spiral_side(&self, gamma: u32, side: CurveSide) -> Result<&SpiralSide, SchemaError> {
        let s = self.spiral(gamma)?;
        Ok(match side {
            CurveSide::A => &s.a,
            CurveSide::B => &s.b,
        })
    }

    fn side_locations(&self) -> Result<BTreeMap<HalfEdge, (usize, usize)>, String> {
        let mut loc = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for (i, s) in tri.iter().enumerate() {
                match self.leaf(s.leaf) {
                    None => return Err(format!("triangle {t} references unknown leaf {}", s.leaf)),
                    Some(l) if l.kind == LeafKind::Closed => {
                        return Err(format!("triangle {t} uses closed leaf {} as a side", s.leaf))
                    }
                    Some(_) => {}
                }
                if loc.insert((s.leaf, s.co), (t, i)).is_some() {
                    return Err(format!(
                        "coorientation {:?} of leaf {} used by more than one side",
                        s.co, s.leaf
                    ));
                }
            }
        }
        Ok(loc)
    }

    /// The leaf end at the tail of a half-edge.
    pub fn tail_end(h: HalfEdge) -> LeafEnd {
        LeafEnd {
            leaf: h.0,
            end: if h.1 == Co::Plus { 0 } else { 1 },
        }
    }

    /// The leaf end at the head of a half-edge.
    pub fn head_end(h: HalfEdge) -> LeafEnd {
        LeafEnd {
            leaf: h.0,
            end: if h.1 == Co::Plus { 1 } else { 0 },
        }
    }

    /// Corner orbits around ideal vertices. Requires every half-edge to be
    /// paired (checked by `validate`).
    fn corner_orbits(
        &self,
        loc: &BTreeMap<HalfEdge, (usize, usize)>,
    ) -> Result<(Vec<Vec<Corner>>, Vec<Vec<LeafEnd>>), String> {
        let mut seen: BTreeSet<Corner> = BTreeSet::new();
        let mut orbits = Vec::new();
        let mut orbit_ends = Vec::new();
        for t in 0..self.triangles.len() {
            for i in 0..3 {
                if seen.contains(&(t, i)) {
                    continue;
                }
                let mut orbit = Vec::new();
                let mut ends = Vec::new();
                let (mut ct, mut ci) = (t, i);
                loop {
                    if !seen.insert((ct, ci)) {
                        return Err("corner rotation is not a free pairing".into());
                    }
                    orbit.push((ct, ci));
                    let s = self.triangles[ct][ci];
                    ends.push(Self::tail_end((s.leaf, s.co)));
                    let &(nt, nj) = loc
                        .get(&(s.leaf, s.co.flip()))
                        .ok_or_else(|| format!("unpaired half-edge on leaf {}", s.leaf))?;
                    ct = nt;
                    ci = (nj + 1) % 3;
                    if (ct, ci) == (t, i) {
                        break;
                    }
                }
                orbits.push(orbit);
                orbit_ends.push(ends);
            }
        }
        Ok((orbits, orbit_ends))
    }

    /// Check all structural invariants, returning human-readable violations.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut ids = BTreeSet::new();
        for l in &self.leaves {
            if !ids.insert(l.id) {
                v.push(format!("duplicate leaf id {}", l.id));
            }
        }
        let n_p = self.cusps.len();
        let _n_closed = self.closed_leaves().count();
        let n_iso = self.isolated_leaves().count();
        let expect_tris = match (2 * self.genus as i64 + n_p as i64).checked_sub(2) {
            Some(k) => 2 * k,
            None => -1,
        };
        if (self.triangles.len() as i64) != expect_tris || expect_tris <= 0 {
            v.push(format!(
                "triangle count {} != 2(2g - 2 + n_p) = {}",
                self.triangles.len(),
                expect_tris
            ));
        }
        if 2 * n_iso != 3 * self.triangles.len() {
            v.push(format!(
                "isolated leaf count {} incompatible with {} triangles",
                n_iso,
                self.triangles.len()
            ));
        }

        let loc = match self.side_locations() {
            Ok(loc) => loc,
            Err(e) => {
                v.push(e);
                return v;
            }
        };
        for id in self.isolated_leaves() {
            for co in [Co::Plus, Co::Minus] {
                if !loc.contains_key(&(id, co)) {
                    v.push(format!("coorientation {co:?} of leaf {id} bounds no triangle"));
                }
            }
        }
        if !v.is_empty() {
            return v;
        }

        // Spiral records: exactly one per closed leaf, signs in {-1, +1}.
        let mut spiral_leaves = BTreeSet::new();
        for s in &self.spirals {
            if !spiral_leaves.insert(s.leaf) {
                v.push(format!("duplicate spiral record for leaf {}", s.leaf));
            }
            if !self.is_closed(s.leaf) {
                v.push(format!("spiral record on non-closed leaf {}", s.leaf));
            }
            for side in [&s.a, &s.b] {
                if side.sigma != 1 && side.sigma != -1 {
                    v.push(format!("sigma {} on leaf {} not in {{-1,+1}}", side.sigma, s.leaf));
                }
                if side.cycle.is_empty() {
                    v.push(format!("empty spiral cycle on leaf {}", s.leaf));
                }
            }
        }
        for id in self.closed_leaves() {
            if !spiral_leaves.contains(&id) {
                v.push(format!("closed leaf {id} has no spiral record"));
            }
        }

        // Every isolated leaf end appears in exactly one cusp or spiral cycle.
        let mut end_use: BTreeMap<LeafEnd, usize> = BTreeMap::new();
        let mut declared: Vec<Vec<LeafEnd>> = Vec::new();
        for c in &self.cusps {
            declared.push(c.ends.clone());
        }
        for s in &self.spirals {
            declared.push(s.a.cycle.clone());
            declared.push(s.b.cycle.clone());
        }
        for cyc in &declared {
            for e in cyc {
                if e.end > 1 {
                    v.push(format!("leaf end index {} out of range", e.end));
                }
                match self.leaf(e.leaf) {
                    None => v.push(format!("cycle references unknown leaf {}", e.leaf)),
                    Some(l) if l.kind == LeafKind::Closed => {
                        v.push(format!("cycle references closed leaf {}", e.leaf))
                    }
                    Some(_) => {}
                }
                *end_use.entry(*e).or_insert(0) += 1;
            }
        }
        for id in self.isolated_leaves() {
            for end in 0..2u8 {
                match end_use.get(&LeafEnd { leaf: id, end }) {
                    Some(1) => {}
                    Some(n) => v.push(format!("end {end} of leaf {id} used {n} times")),
                    None => v.push(format!("end {end} of leaf {id} unaccounted")),
                }
            }
        }
        if !v.is_empty() {
            return v;
        }

        // Derived vertex orbits must match declared cusp/spiral cycles up to
        // rotation, bijectively.
        let (_, orbit_ends) = match self.corner_orbits(&loc) {
            Ok(o) => o,
            Err(e) => {
                v.push(e);
                return v;
            }
        };
        let mut unmatched: Vec<Vec<LeafEnd>> = declared;
        for ends in &orbit_ends {
            let pos = unmatched.iter().position(|c| cyclic_eq(c, ends));
            match pos {
                Some(p) => {
                    unmatched.remove(p);
                }
                None => v.push(format!("derived vertex cycle {ends:?} matches no declared cycle")),
            }
        }
        for c in &unmatched {
            v.push(format!("declared cycle {c:?} is not a vertex cycle of the gluing"));
        }
        v
    }

    /// Build derived incidence data; errors if the schema is invalid.
    pub fn cells(&self) -> Result<Cells, SchemaError> {
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(SchemaError::Invalid(violations.join("; ")));
        }
        let side_loc = self.side_locations().map_err(SchemaError::Invalid)?;
        let (orbits, orbit_ends) = self.corner_orbits(&side_loc).map_err(SchemaError::Invalid)?;
        Ok(Cells {
            side_loc,
            orbits,
            orbit_ends,
        })
    }

    /// Intersection counts of the collar sides of a closed leaf with each leaf.
    pub fn crossing_counts(
        &self,
        gamma: u32,
    ) -> Result<(BTreeMap<u32, u32>, BTreeMap<u32, u32>), SchemaError> {
        let s = self.spiral(gamma)?;
        let count = |cycle: &[LeafEnd]| {
            let mut m: BTreeMap<u32, u32> = self.leaves.iter().map(|l| (l.id, 0)).collect();
            for e in cycle {
                *m.get_mut(&e.leaf).expect("validated leaf") += 1;
            }
            m
        };
        Ok((count(&s.a.cycle), count(&s.b.cycle)))
    }

    /// Number of ends of each leaf incident to cusp `c`.
    pub fn cusp_counts(&self, c: usize) -> Result<BTreeMap<u32, u32>, SchemaError> {
        let cusp = self
            .cusps
            .get(c)
            .ok_or_else(|| SchemaError::Invalid(format!("no cusp {c}")))?;
        let mut m: BTreeMap<u32, u32> = self.leaves.iter().map(|l| (l.id, 0)).collect();
        for e in &cusp.ends {
            *m.get_mut(&e.leaf)
                .ok_or_else(|| SchemaError::Invalid(format!("unknown leaf {}", e.leaf)))? += 1;
        }
        Ok(m)
    }

    /// Locate a leaf end among the spiral cycles of a closed leaf.
    pub fn find_spiral_end(&self, gamma: u32, e: LeafEnd) -> Option<(CurveSide, usize)> {
        let s = self.spiral(gamma).ok()?;
        if let Some(p) = s.a.cycle.iter().position(|x| *x == e) {
            return Some((CurveSide::A, p));
        }
        if let Some(p) = s.b.cycle.iter().position(|x| *x == e) {
            return Some((CurveSide::B, p));
        }
        None
    }

    /// Locate a leaf end among all spiral cycles of all closed leaves.
    pub fn find_any_spiral_end(&self, e: LeafEnd) -> Option<(u32, CurveSide, usize)> {
        for s in &self.spirals {
            if let Some((side, p)) = self.find_spiral_end(s.leaf, e) {
                return Some((s.leaf, side, p));
            }
        }
        None
    }

    /// The turn a word must take into the spiral region of a side, forced by
    /// the spiraling handedness.
    pub fn spiral_entry_turn(&self, gamma: u32, side: CurveSide) -> Result<Turn, SchemaError> {
        let s = self.spiral_side(gamma, side)?;
        Ok(if s.sigma > 0 { Turn::R } else { Turn::L })
    }

    /// The turn taken unspiraling out of a side; curve reversal swaps turns,
    /// so it is opposite to the entry turn of the same side.
    pub fn spiral_exit_turn(&self, gamma: u32, side: CurveSide) -> Result<Turn, SchemaError> {
        Ok(self.spiral_entry_turn(gamma, side)?.other())
    }
}

fn cyclic_eq(a: &[LeafEnd], b: &[LeafEnd]) -> bool {
    if a.len() != b.len() || a.is_empty() {
        return a.len() == b.len();
    }
    (0..a.len()).any(|r| (0..a.len()).all(|i| a[(i + r) % a.len()] == b[i]))
}

/// Reference schema: once-punctured torus triangulated by three isolated
/// leaves and two triangles around a single cusp.
pub fn punctured_torus_plain() -> TriangulationSchema {
    let side = |leaf, co| SideRef { leaf, co };
    let end = |leaf, end| LeafEnd { leaf, end };
    TriangulationSchema {
        leaves: vec![
            Leaf { id: 0, kind: LeafKind::Isolated },
            Leaf { id: 1, kind: LeafKind::Isolated },
            Leaf { id: 2, kind: LeafKind::Isolated },
        ],
        triangles: vec![
            [side(0, Co::Plus), side(1, Co::Plus), side(2, Co::Plus)],
            [side(2, Co::Minus), side(0, Co::Minus), side(1, Co::Minus)],
        ],
        spirals: vec![],
        cusps: vec![Cusp {
            ends: vec![end(0, 0), end(1, 1), end(2, 0), end(0, 1), end(1, 0), end(2, 1)],
        }],
        genus: 1,
    }
}

/// Reference schema: once-punctured torus containing a pants curve (leaf 0)
/// with leaves 1, 2, 3 spiraling onto it, all spiral signs -1.
pub fn punctured_torus_pants() -> TriangulationSchema {
    complete_pants(&[Pant {
        ends: [
            PantEnd::Cusp,
            PantEnd::Curve { id: 0, side: CurveSide::A },
            PantEnd::Curve { id: 0, side: CurveSide::B },
        ],
    }])
    .expect("reference pants schema")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PantEnd {
    Cusp,
    Curve { id: u32, side: CurveSide },
}

#[derive(Debug, Clone)]
pub struct Pant {
    pub ends: [PantEnd; 3],
}

/// Extend a pants decomposition to a maximal lamination: each pair of pants
/// receives two ideal triangles and three isolated leaves, every spiral sign
/// is -1. Curve ids are taken from the pants data; isolated leaves get fresh
/// ids above them.
pub fn complete_pants(pants: &[Pant]) -> Result<TriangulationSchema, SchemaError> {
    if pants.is_empty() {
        return Err(SchemaError::InvalidPants("no pants".into()));
    }
    let mut curve_sides: BTreeSet<(u32, CurveSide)> = BTreeSet::new();
    let mut n_p = 0usize;
    for p in pants {
        for e in &p.ends {
            match *e {
                PantEnd::Cusp => n_p += 1,
                PantEnd::Curve { id, side } => {
                    if !curve_sides.insert((id, side)) {
                        return Err(SchemaError::InvalidPants(format!(
                            "side {side:?} of curve {id} used twice"
                        )));
                    }
                }
            }
        }
    }
    let curves: BTreeSet<u32> = curve_sides.iter().map(|&(id, _)| id).collect();
    for &id in &curves {
        for side in [CurveSide::A, CurveSide::B] {
            if !curve_sides.contains(&(id, side)) {
                return Err(SchemaError::InvalidPants(format!(
                    "side {side:?} of curve {id} unused"
                )));
            }
        }
    }
    // #pants = 2g - 2 + n_p determines the genus.
    let twog = pants.len() as i64 + 2 - n_p as i64;
    if twog < 0 || twog % 2 != 0 {
        return Err(SchemaError::InvalidPants(format!(
            "{} pants with {} cusp ends close up no surface",
            pants.len(),
            n_p
        )));
    }
    let genus = (twog / 2) as u32;
    if curves.len() as i64 != 3 * genus as i64 + n_p as i64 - 3 {
        return Err(SchemaError::InvalidPants(format!(
            "{} curves, expected {}",
            curves.len(),
            3 * genus as i64 + n_p as i64 - 3
        )));
    }

    let mut next_id = curves.iter().max().map_or(0, |m| m + 1);
    let mut leaves: Vec<Leaf> = curves
        .iter()
        .map(|&id| Leaf { id, kind: LeafKind::Closed })
        .collect();
    let mut triangles = Vec::new();
    let mut cusps = Vec::new();
    let mut spiral_cycles: BTreeMap<(u32, CurveSide), Vec<LeafEnd>> = BTreeMap::new();

    for p in pants {
        let ids = [next_id, next_id + 1, next_id + 2];
        next_id += 3;
        for id in ids {
            leaves.push(Leaf { id, kind: LeafKind::Isolated });
        }
        let [pp, qq, rr] = ids;
        let side = |leaf, co| SideRef { leaf, co };
        triangles.push([side(pp, Co::Plus), side(qq, Co::Plus), side(rr, Co::Plus)]);
        triangles.push([side(pp, Co::Minus), side(rr, Co::Minus), side(qq, Co::Minus)]);
        // Vertex cycles of the two-triangle pants gluing, one per pant end.
        let cycles = [
            vec![LeafEnd { leaf: pp, end: 0 }, LeafEnd { leaf: rr, end: 1 }],
            vec![LeafEnd { leaf: qq, end: 0 }, LeafEnd { leaf: pp, end: 1 }],
            vec![LeafEnd { leaf: rr, end: 0 }, LeafEnd { leaf: qq, end: 1 }],
        ];
        for (e, cyc) in p.ends.iter().zip(cycles) {
            match *e {
                PantEnd::Cusp => cusps.push(Cusp { ends: cyc }),
                PantEnd::Curve { id, side } => {
                    spiral_cycles.insert((id, side), cyc);
                }
            }
        }
    }
    let spirals = curves
        .iter()
        .map(|&id| SpiralData {
            leaf: id,
            a: SpiralSide {
                cycle: spiral_cycles[&(id, CurveSide::A)].clone(),
                sigma: -1,
            },
            b: SpiralSide {
                cycle: spiral_cycles[&(id, CurveSide::B)].clone(),
                sigma: -1,
            },
        })
        .collect();

    let schema = TriangulationSchema {
        leaves,
        triangles,
        spirals,
        cusps,
        genus,
    };
    let violations = schema.validate();
    if !violations.is_empty() {
        return Err(SchemaError::InvalidPants(violations.join("; ")));
    }
    Ok(schema)
}

/// One resolved step of a traced crossing word.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Iso(IsoStep),
    Closed(ClosedStep),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IsoStep {
    pub leaf: u32,
    pub turn: Turn,
    /// Half-edge by which the step enters its triangle.
    pub entered_via: HalfEdge,
    pub tri: usize,
    pub entry_idx: usize,
    pub exit_idx: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClosedStep {
    pub leaf: u32,
    pub wraps: i32,
    /// Side of the closed leaf the word approaches from, with the position of
    /// the entry strand's end in that side's spiral cycle and the strand
    /// half-edge bounding the triangle the word comes from.
    pub entry_side: CurveSide,
    pub entry_pos: usize,
    pub entry_turn: Turn,
    pub entry_strand: HalfEdge,
    /// Mirrored exit data: the strand crossed last when unspiraling, and the
    /// triangle entered through it.
    pub exit_side: CurveSide,
    pub exit_pos: usize,
    pub exit_turn: Turn,
    pub exit_strand: HalfEdge,
    pub exit_tri: usize,
    pub exit_entry_idx: usize,
}

/// Trace of a cyclic crossing word through a schema.
#[derive(Debug, Clone)]
pub struct Trace {
    pub steps: Vec<Step>,
}

impl Trace {
    /// Leaves met by the traced curve, counting spiral-cycle members of a
    /// crossed closed leaf as met.
    pub fn leaves_crossed(&self, schema: &TriangulationSchema) -> BTreeSet<u32> {
        let mut s = BTreeSet::new();
        for st in &self.steps {
            match st {
                Step::Iso(i) => {
                    s.insert(i.leaf);
                }
                Step::Closed(c) => {
                    s.insert(c.leaf);
                    if let Ok(sp) = schema.spiral(c.leaf) {
                        for e in sp.a.cycle.iter().chain(&sp.b.cycle) {
                            s.insert(e.leaf);
                        }
                    }
                }
            }
        }
        s
    }

    pub fn crosses_closed_leaf(&self) -> bool {
        self.steps.iter().any(|s| matches!(s, Step::Closed(_)))
    }
}

struct Tracer<'a> {
    schema: &'a TriangulationSchema,
    cells: &'a Cells,
}

impl<'a> Tracer<'a> {
    /// Exit data of a triangle traversal: crossing side half-edge and the end
    /// of that side's leaf at the turn corner.
    fn exit_of(&self, tri: usize, entry_idx: usize, turn: Turn) -> (HalfEdge, LeafEnd) {
        let k = (entry_idx + if turn == Turn::R { 1 } else { 2 }) % 3;
        let s = self.schema.triangles[tri][k];
        let h = (s.leaf, s.co);
        let corner_end = match turn {
            Turn::R => TriangulationSchema::tail_end(h),
            Turn::L => TriangulationSchema::head_end(h),
        };
        (h, corner_end)
    }

    /// Resolve the state just after a closed crossing from its exit record
    /// alone: the side holding the exit end, the strand crossed last, the
    /// triangle entered, and the forced unspiraling turn.
    fn resolve_closed_exit(
        &self,
        c: &ClosedCrossing,
    ) -> Result<(CurveSide, usize, Turn, HalfEdge, usize, usize), SchemaError> {
        let (exit_side, exit_pos) =
            self.schema.find_spiral_end(c.leaf, c.exit).ok_or_else(|| {
                SchemaError::BadWord(format!(
                    "exit end {:?} does not spiral onto closed leaf {}",
                    c.exit, c.leaf
                ))
            })?;
        let exit_turn = self.schema.spiral_exit_turn(c.leaf, exit_side)?;
        // The exit end sits at the tail of one half-edge of its leaf and at
        // the head of the other; the unspiraling handedness picks which of
        // the two flanking triangles the word lands in.
        let tail_h = (c.exit.leaf, if c.exit.end == 0 { Co::Plus } else { Co::Minus });
        let strand = match exit_turn {
            Turn::L => tail_h,
            Turn::R => (tail_h.0, tail_h.1.flip()),
        };
        let &(tri, idx) = self.cells.side_loc.get(&strand).expect("validated half-edge");
        Ok((exit_side, exit_pos, exit_turn, strand, tri, idx))
    }
}

/// Trace a cyclic crossing word, validating every adjacency.
///
/// Words containing a closed crossing are anchored by its exit resolution,
/// which depends only on the crossing record. Purely isolated words are
/// anchored at their first entry, whose crossing direction is the one (of
/// two) that closes up. A single closed crossing by itself stands for the
/// closed leaf as a curve; it is resolved formally with the entry pinned to
/// the opposite side's distinguished corner.
pub fn trace_word(
    schema: &TriangulationSchema,
    cells: &Cells,
    word: &CurveClass,
) -> Result<Trace, SchemaError> {
    if word.word.is_empty() {
        return Err(SchemaError::BadWord("empty word".into()));
    }
    let tracer = Tracer { schema, cells };
    let n = word.word.len();

    if n == 1 {
        if let Crossing::Closed(c) = word.word[0] {
            let (exit_side, exit_pos, exit_turn, exit_strand, tri, idx) =
                tracer.resolve_closed_exit(&c)?;
            let entry_side = exit_side.other();
            let entry_turn = schema.spiral_entry_turn(c.leaf, entry_side)?;
            let e0 = schema.spiral_side(c.leaf, entry_side)?.cycle[0];
            let tail_h = (e0.leaf, if e0.end == 0 { Co::Plus } else { Co::Minus });
            let entry_strand = match entry_turn {
                Turn::R => tail_h,
                Turn::L => (tail_h.0, tail_h.1.flip()),
            };
            return Ok(Trace {
                steps: vec![Step::Closed(ClosedStep {
                    leaf: c.leaf,
                    wraps: c.wraps,
                    entry_side,
                    entry_pos: 0,
                    entry_turn,
                    entry_strand,
                    exit_side,
                    exit_pos,
                    exit_turn,
                    exit_strand,
                    exit_tri: tri,
                    exit_entry_idx: idx,
                })],
            });
        }
    }

    let closed_at = word
        .word
        .iter()
        .position(|c| matches!(c, Crossing::Closed(_)));

    // State: the half-edge about to be crossed into (`incoming`), plus the
    // turn taken in the triangle just left and the leaf end at its corner.
    let run = |start: usize, anchor: (HalfEdge, Turn, Option<LeafEnd>)| -> Result<Trace, SchemaError> {
        let (mut incoming, mut prev_turn, mut prev_corner) = anchor;
        let first_incoming = incoming;
        let mut steps: Vec<Option<Step>> = vec![None; n];
        for k in 0..n {
            let i = (start + k) % n;
            match word.word[i] {
                Crossing::Iso(is) => {
                    if incoming.0 != is.leaf {
                        return Err(SchemaError::BadWord(format!(
                            "entry {i} crosses leaf {} but the path reaches leaf {}",
                            is.leaf, incoming.0
                        )));
                    }
                    let &(tri, entry_idx) = cells
                        .side_loc
                        .get(&incoming)
                        .ok_or_else(|| SchemaError::BadWord(format!("no side {incoming:?}")))?;
                    let (h_out, corner) = tracer.exit_of(tri, entry_idx, is.turn);
                    let exit_idx = (entry_idx + if is.turn == Turn::R { 1 } else { 2 }) % 3;
                    steps[i] = Some(Step::Iso(IsoStep {
                        leaf: is.leaf,
                        turn: is.turn,
                        entered_via: incoming,
                        tri,
                        entry_idx,
                        exit_idx,
                    }));
                    incoming = (h_out.0, h_out.1.flip());
                    prev_turn = is.turn;
                    prev_corner = Some(corner);
                }
                Crossing::Closed(c) => {
                    if !schema.is_closed(c.leaf) {
                        return Err(SchemaError::BadWord(format!(
                            "closed crossing names non-closed leaf {}",
                            c.leaf
                        )));
                    }
                    let corner = prev_corner.ok_or_else(|| {
                        SchemaError::BadWord("closed crossing with no preceding step".into())
                    })?;
                    let (entry_side, entry_pos) =
                        schema.find_spiral_end(c.leaf, corner).ok_or_else(|| {
                            SchemaError::BadWord(format!(
                                "corner end {corner:?} does not spiral onto closed leaf {}",
                                c.leaf
                            ))
                        })?;
                    let required = schema.spiral_entry_turn(c.leaf, entry_side)?;
                    if prev_turn != required {
                        return Err(SchemaError::BadWord(format!(
                            "turn into the spiral region of leaf {} must be {:?}",
                            c.leaf, required
                        )));
                    }
                    // The strand bounding the triangle the word comes from is
                    // the side it just exited through.
                    let entry_strand = (incoming.0, incoming.1.flip());
                    let (exit_side, exit_pos, exit_turn, exit_strand, tri, idx) =
                        tracer.resolve_closed_exit(&c)?;
                    if exit_side != entry_side.other() {
                        return Err(SchemaError::BadWord(format!(
                            "closed crossing of leaf {} enters and exits on side {entry_side:?}",
                            c.leaf
                        )));
                    }
                    steps[i] = Some(Step::Closed(ClosedStep {
                        leaf: c.leaf,
                        wraps: c.wraps,
                        entry_side,
                        entry_pos,
                        entry_turn: prev_turn,
                        entry_strand,
                        exit_side,
                        exit_pos,
                        exit_turn,
                        exit_strand,
                        exit_tri: tri,
                        exit_entry_idx: idx,
                    }));
                    let (h_out, corner) = tracer.exit_of(tri, idx, exit_turn);
                    incoming = (h_out.0, h_out.1.flip());
                    prev_turn = exit_turn;
                    prev_corner = Some(corner);
                }
            }
        }
        if incoming != first_incoming {
            return Err(SchemaError::BadWord(format!(
                "word does not close up: path returns to {incoming:?}, expected {first_incoming:?}"
            )));
        }
        Ok(Trace {
            steps: steps.into_iter().map(|s| s.expect("all filled")).collect(),
        })
    };

    match closed_at {
        Some(m) => {
            // Anchor just after the closed crossing; the loop re-validates it
            // as the last processed entry and closure is then automatic.
            let c = match word.word[m] {
                Crossing::Closed(c) => c,
                Crossing::Iso(_) => unreachable!(),
            };
            let (_, _, exit_turn, _, tri, idx) = tracer.resolve_closed_exit(&c)?;
            let (h_out, corner) = tracer.exit_of(tri, idx, exit_turn);
            run(
                (m + 1) % n,
                ((h_out.0, h_out.1.flip()), exit_turn, Some(corner)),
            )
        }
        None => {
            let leaf0 = match word.word[0] {
                Crossing::Iso(is) => is.leaf,
                Crossing::Closed(_) => unreachable!(),
            };
            if !matches!(schema.leaf(leaf0), Some(l) if l.kind == LeafKind::Isolated) {
                return Err(SchemaError::BadWord(format!(
                    "isolated crossing names non-isolated leaf {leaf0}"
                )));
            }
            // The word fixes the traversal; only the crossing direction of
            // the first entry is free.
            let plus = run(0, ((leaf0, Co::Plus), Turn::L, None));
            match plus {
                Ok(t) => Ok(t),
                Err(_) => run(0, ((leaf0, Co::Minus), Turn::L, None)),
            }
        }
    }
}

/// A word is peripheral when it winds around a single cusp: isolated
/// crossings only, constant turn, all turn corners on one cusp cycle.
pub fn is_peripheral(schema: &TriangulationSchema, cells: &Cells, trace: &Trace) -> bool {
    let mut turns = BTreeSet::new();
    let mut corners = Vec::new();
    let tracer = Tracer { schema, cells };
    for s in &trace.steps {
        match s {
            Step::Closed(_) => return false,
            Step::Iso(i) => {
                turns.insert(match i.turn {
                    Turn::L => 0u8,
                    Turn::R => 1,
                });
                let (_, corner) = tracer.exit_of(i.tri, i.entry_idx, i.turn);
                corners.push(corner);
            }
        }
    }
    if turns.len() != 1 {
        return false;
    }
    schema
        .cusps
        .iter()
        .any(|c| corners.iter().all(|e| c.ends.contains(e)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_torus_is_valid() {
        let s = punctured_torus_plain();
        assert!(s.validate().is_empty(), "{:?}", s.validate());
        let cells = s.cells().unwrap();
        assert_eq!(cells.orbits.len(), 1);
        assert_eq!(cells.orbits[0].len(), 6);
    }

    #[test]
    fn pants_torus_is_valid() {
        let s = punctured_torus_pants();
        assert!(s.validate().is_empty(), "{:?}", s.validate());
        assert_eq!(s.triangles.len(), 2);
        assert_eq!(s.leaves.len(), 4);
        assert_eq!(s.closed_leaves().count(), 1);
        let cells = s.cells().unwrap();
        assert_eq!(cells.orbits.len(), 3);
    }

    #[test]
    fn genus_two_completion_counts() {
        // Two pants glued along all three curves.
        let pants = [
            Pant {
                ends: [
                    PantEnd::Curve { id: 0, side: CurveSide::A },
                    PantEnd::Curve { id: 1, side: CurveSide::A },
                    PantEnd::Curve { id: 2, side: CurveSide::A },
                ],
            },
            Pant {
                ends: [
                    PantEnd::Curve { id: 0, side: CurveSide::B },
                    PantEnd::Curve { id: 1, side: CurveSide::B },
                    PantEnd::Curve { id: 2, side: CurveSide::B },
                ],
            },
        ];
        let s = complete_pants(&pants).unwrap();
        assert_eq!(s.genus, 2);
        assert_eq!(s.triangles.len(), 4);
        assert_eq!(s.leaves.len(), 9);
        assert!(s.validate().is_empty(), "{:?}", s.validate());
    }

    #[test]
    fn crossing_and_cusp_counts() {
        let s = punctured_torus_plain();
        let m = s.cusp_counts(0).unwrap();
        assert_eq!(m[&0], 2);
        assert_eq!(m[&1], 2);
        assert_eq!(m[&2], 2);

        let s = punctured_torus_pants();
        let (a, b) = s.crossing_counts(0).unwrap();
        assert_eq!(a[&0], 0);
        assert_eq!(a.values().sum::<u32>(), 2);
        assert_eq!(b.values().sum::<u32>(), 2);
        // The cusp-to-collar leaves each hit one side once; the collar-to-
        // collar leaf hits both sides.
        let both: Vec<u32> = s
            .isolated_leaves()
            .filter(|id| a[id] == 1 && b[id] == 1)
            .collect();
        assert_eq!(both.len(), 1);
        assert!(s.crossing_counts(1).is_err());
    }

    #[test]
    fn end_accounting() {
        for s in [punctured_torus_plain(), punctured_torus_pants()] {
            let cusp_ends: usize = s.cusps.iter().map(|c| c.ends.len()).sum();
            let spiral_ends: usize = s
                .spirals
                .iter()
                .map(|sp| sp.a.cycle.len() + sp.b.cycle.len())
                .sum();
            assert_eq!(cusp_ends + spiral_ends, 2 * s.isolated_leaves().count());
        }
    }

    #[test]
    fn generator_word_traces() {
        let s = punctured_torus_plain();
        let cells = s.cells().unwrap();
        let w = CurveClass::iso(&[(1, Turn::R), (2, Turn::L)]);
        let t = trace_word(&s, &cells, &w).unwrap();
        assert_eq!(t.steps.len(), 2);
        assert!(!is_peripheral(&s, &cells, &t));
        assert_eq!(t.leaves_crossed(&s), BTreeSet::from([1, 2]));
    }

    #[test]
    fn bad_words_rejected() {
        let s = punctured_torus_plain();
        let cells = s.cells().unwrap();
        // Wrong continuation leaf.
        let w = CurveClass::iso(&[(1, Turn::R), (1, Turn::L)]);
        assert!(trace_word(&s, &cells, &w).is_err());
        // Does not close up.
        let w = CurveClass::iso(&[(1, Turn::R), (2, Turn::R), (1, Turn::R)]);
        assert!(trace_word(&s, &cells, &w).is_err());
        let w = CurveClass { word: vec![] };
        assert!(trace_word(&s, &cells, &w).is_err());
    }

    #[test]
    fn cusp_word_is_peripheral() {
        let s = punctured_torus_plain();
        let cells = s.cells().unwrap();
        let loops = [
            CurveClass::iso(&[0, 1, 2, 0, 1, 2].map(|l| (l, Turn::R))),
            CurveClass::iso(&[0, 2, 1, 0, 2, 1].map(|l| (l, Turn::L))),
        ];
        for w in loops {
            let t = trace_word(&s, &cells, &w).unwrap();
            assert!(is_peripheral(&s, &cells, &t));
        }
    }

    #[test]
    fn transverse_word_traces_through_pants_curve() {
        let s = punctured_torus_pants();
        let cells = s.cells().unwrap();
        // Find a transverse word by construction: cross the leaf that meets
        // both sides, approach the pants curve with the forced turn, exit at
        // each candidate end.
        let (a, b) = s.crossing_counts(0).unwrap();
        let both: u32 = s
            .isolated_leaves()
            .find(|id| a[id] == 1 && b[id] == 1)
            .unwrap();
        let mut found = false;
        for turn in [Turn::L, Turn::R] {
            for exit in s.spiral(0).unwrap().a.cycle.iter().chain(&s.spiral(0).unwrap().b.cycle) {
                let w = CurveClass {
                    word: vec![
                        Crossing::Iso(IsoCrossing { leaf: both, turn }),
                        Crossing::Closed(ClosedCrossing { leaf: 0, exit: *exit, wraps: 0 }),
                    ],
                };
                if let Ok(t) = trace_word(&s, &cells, &w) {
                    found = true;
                    assert!(t.crosses_closed_leaf());
                    assert_eq!(t.leaves_crossed(&s).len(), 4);
                }
            }
        }
        assert!(found, "no transverse word closes up");
    }

    #[test]
    fn all_closed_word_traces() {
        let s = punctured_torus_pants();
        let cells = s.cells().unwrap();
        let mut found = 0;
        for exit in s.spiral(0).unwrap().a.cycle.iter().chain(&s.spiral(0).unwrap().b.cycle) {
            let w = CurveClass {
                word: vec![Crossing::Closed(ClosedCrossing { leaf: 0, exit: *exit, wraps: 0 })],
            };
            if trace_word(&s, &cells, &w).is_ok() {
                found += 1;
            }
        }
        assert!(found > 0, "no single-crossing closed word traces");
    }

    #[test]
    fn json_round_trip_and_strictness() {
        let s = punctured_torus_pants();
        let j = s.to_json();
        let back = TriangulationSchema::from_json(&j).unwrap();
        assert_eq!(s, back);

        let w = CurveClass::iso(&[(1, Turn::R), (2, Turn::L)]);
        let j = w.to_json();
        assert_eq!(CurveClass::from_json(&j).unwrap(), w);

        assert!(TriangulationSchema::from_json("{\"leaves\":[]}").is_err());
        assert!(CurveClass::from_json("{\"word\":[{\"leaf\":1,\"turn\":\"L\",\"x\":0}]}").is_err());
        assert!(CurveClass::from_json("{\"word\":[{\"leaf\":1,\"spin\":\"L\"}]}").is_err());
    }

    #[test]
    fn corrupted_schemas_rejected() {
        let base = punctured_torus_plain();
        let pants = punctured_torus_pants();
        let reject = |s: &TriangulationSchema| {
            assert!(!s.validate().is_empty(), "mutant accepted: {s:?}");
        };

        // 1: triangle removed
        let mut m = base.clone();
        m.triangles.pop();
        reject(&m);
        // 2: leaf removed
        let mut m = base.clone();
        m.leaves.pop();
        reject(&m);
        // 3: duplicate leaf id
        let mut m = base.clone();
        m.leaves[1].id = 0;
        reject(&m);
        // 4: coorientation used twice
        let mut m = base.clone();
        m.triangles[1][0] = SideRef { leaf: 0, co: Co::Plus };
        reject(&m);
        // 5: wrong genus
        let mut m = base.clone();
        m.genus = 2;
        reject(&m);
        // 6: cusp dropped
        let mut m = base.clone();
        m.cusps.clear();
        reject(&m);
        // 7: cusp cycle order scrambled (not a rotation)
        let mut m = base.clone();
        m.cusps[0].ends.swap(0, 1);
        reject(&m);
        // 8: cusp end duplicated
        let mut m = base.clone();
        m.cusps[0].ends[0] = m.cusps[0].ends[1];
        reject(&m);
        // 9: end index out of range
        let mut m = base.clone();
        m.cusps[0].ends[0].end = 2;
        reject(&m);
        // 10: unknown leaf in a triangle
        let mut m = base.clone();
        m.triangles[0][0].leaf = 9;
        reject(&m);
        // 11: closed leaf as a triangle side
        let mut m = pants.clone();
        m.triangles[0][0].leaf = 0;
        reject(&m);
        // 12: spiral record dropped
        let mut m = pants.clone();
        m.spirals.clear();
        reject(&m);
        // 13: spiral sigma out of range
        let mut m = pants.clone();
        m.spirals[0].a.sigma = 0;
        reject(&m);
        // 14: spiral cycle emptied
        let mut m = pants.clone();
        m.spirals[0].a.cycle.clear();
        reject(&m);
        // 15: spiral cycle references a closed leaf
        let mut m = pants.clone();
        m.spirals[0].a.cycle[0].leaf = 0;
        reject(&m);
        // 16: spiral record on an isolated leaf
        let mut m = pants.clone();
        m.spirals.push(SpiralData {
            leaf: 1,
            a: m.spirals[0].a.clone(),
            b: m.spirals[0].b.clone(),
        });
        reject(&m);
        // 17: leaf kind flipped to closed
        let mut m = base.clone();
        m.leaves[0].kind = LeafKind::Closed;
        reject(&m);
        // 18: two cusp cycles where the gluing has one vertex
        let mut m = base.clone();
        let ends = m.cusps[0].ends.split_off(3);
        m.cusps.push(Cusp { ends });
        reject(&m);
        // 19: spiral cycles swapped between sides of different structure
        let mut m = pants.clone();
        let extra = m.spirals[0].b.cycle[0];
        m.spirals[0].a.cycle.push(extra);
        reject(&m);
        // 20: triangle orientation scrambled (sides permuted oddly)
        let mut m = base.clone();
        m.triangles[0].swap(0, 1);
        reject(&m);
    }

    #[test]
    fn pants_builder_rejects_bad_data() {
        assert!(complete_pants(&[]).is_err());
        // One pant, one curve side used twice.
        let p = Pant {
            ends: [
                PantEnd::Cusp,
                PantEnd::Curve { id: 0, side: CurveSide::A },
                PantEnd::Curve { id: 0, side: CurveSide::A },
            ],
        };
        assert!(complete_pants(&[p]).is_err());
        // Curve side left unused.
        let p = Pant {
            ends: [
                PantEnd::Cusp,
                PantEnd::Cusp,
                PantEnd::Curve { id: 0, side: CurveSide::A },
            ],
        };
        assert!(complete_pants(&[p]).is_err());
    }
}
