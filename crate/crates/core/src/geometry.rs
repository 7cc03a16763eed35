//! Discrete space: a voxel grid, regions as closed cell unions, faces, parts,
//! and the subbody class and material universe of a body.
//!
//! A cell is an open unit cube of edge `h`; a face is the open square between
//! two axis neighbours (or a cell and the grid border). A [`Region`] is read as
//! the *closed* union of its cells, so two regions can share faces without
//! sharing cells. A [`Part`] is a finite set of atoms (cells and faces): the
//! finite Borel algebra the measures live on.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("grid dimensions must all be at least 1, got {0:?}")]
    BadDims([usize; 3]),
    #[error("grid spacing must be positive and finite")]
    BadSpacing,
    #[error("cell index {0} lies outside the grid")]
    CellOutOfBounds(usize),
    #[error("cell {0:?} lies outside the grid")]
    CoordsOutOfBounds([usize; 3]),
    #[error("face {0} lies outside the grid")]
    FaceOutOfBounds(Face),
    #[error("region is not contained in its host region")]
    NotSubset,
    #[error("{what}: 2^{cells} - 1 candidates exceed the enumeration cap {cap}")]
    TooLarge { what: &'static str, cells: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn name(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

/// Direction of a face normal along its axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn reversed(self) -> Self {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Orientation::Positive => 1,
            Orientation::Negative => -1,
        }
    }
}

/// Linear cell index `x + nx * (y + ny * z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CellId(pub u32);

impl CellId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// The face on the low side of cell `pos` along `axis`.
///
/// `pos[axis]` ranges over `0..=n_axis`, so the high border of the grid is the
/// low face of a virtual cell one past the end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Face {
    pub axis: Axis,
    pub pos: [u32; 3],
}

impl Face {
    pub fn new(axis: Axis, pos: [usize; 3]) -> Self {
        Face { axis, pos: pos.map(|p| p as u32) }
    }

    pub fn coords(&self) -> [usize; 3] {
        self.pos.map(|p| p as usize)
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}:{},{},{}", self.axis.name(), self.pos[0], self.pos[1], self.pos[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrientedFace {
    pub face: Face,
    pub orientation: Orientation,
}

impl OrientedFace {
    pub fn reversed(self) -> Self {
        OrientedFace { face: self.face, orientation: self.orientation.reversed() }
    }
}

/// An atom of the finite part algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Cell(CellId),
    Face(Face),
}

/// Finite axis-aligned voxel grid with uniform spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    dims: [usize; 3],
    spacing: T,
}

impl<T: Scalar> Grid<T> {
    pub fn new(dims: [usize; 3], spacing: T) -> Result<Self, GeometryError> {
        if dims.contains(&0) || dims.iter().any(|&d| d > u32::MAX as usize / 4) {
            return Err(GeometryError::BadDims(dims));
        }
        if !(spacing.is_finite() && spacing > T::zero()) {
            return Err(GeometryError::BadSpacing);
        }
        Ok(Grid { dims, spacing })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn num_cells(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn cell_volume(&self) -> T {
        self.spacing * self.spacing * self.spacing
    }

    pub fn face_area(&self) -> T {
        self.spacing * self.spacing
    }

    pub fn cell(&self, coords: [usize; 3]) -> Option<CellId> {
        let [nx, ny, nz] = self.dims;
        let [x, y, z] = coords;
        (x < nx && y < ny && z < nz).then(|| CellId((x + nx * (y + ny * z)) as u32))
    }

    pub fn coords(&self, cell: CellId) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        let i = cell.index();
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    }

    pub fn contains_cell(&self, cell: CellId) -> bool {
        cell.index() < self.num_cells()
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> {
        (0..self.num_cells() as u32).map(CellId)
    }

    pub fn contains_face(&self, face: &Face) -> bool {
        let a = face.axis.index();
        face.coords()
            .iter()
            .enumerate()
            .all(|(k, &p)| if k == a { p <= self.dims[k] } else { p < self.dims[k] })
    }

    /// Cells on the low and high side of a face; `None` past the grid border.
    pub fn face_cells(&self, face: &Face) -> [Option<CellId>; 2] {
        let a = face.axis.index();
        let high = face.coords();
        let low = (high[a] > 0).then(|| {
            let mut c = high;
            c[a] -= 1;
            c
        });
        [low.and_then(|c| self.cell(c)), self.cell(high)]
    }

    /// The six faces of a cell, oriented outward.
    pub fn cell_faces(&self, cell: CellId) -> [OrientedFace; 6] {
        let c = self.coords(cell);
        let mut out = [OrientedFace {
            face: Face::new(Axis::X, c),
            orientation: Orientation::Negative,
        }; 6];
        for axis in Axis::ALL {
            let a = axis.index();
            let mut hi = c;
            hi[a] += 1;
            out[2 * a] = OrientedFace { face: Face::new(axis, c), orientation: Orientation::Negative };
            out[2 * a + 1] = OrientedFace { face: Face::new(axis, hi), orientation: Orientation::Positive };
        }
        out
    }

    /// Face-adjacent neighbours of a cell.
    pub fn neighbors(&self, cell: CellId) -> impl Iterator<Item = CellId> + '_ {
        let c = self.coords(cell);
        Axis::ALL.into_iter().flat_map(move |axis| {
            let a = axis.index();
            let mut lo = c;
            let mut hi = c;
            let down = (c[a] > 0).then(|| {
                lo[a] -= 1;
                lo
            });
            hi[a] += 1;
            [down.and_then(|p| self.cell(p)), self.cell(hi)]
        })
        .flatten()
    }

    /// Face shared by two face-adjacent cells.
    pub fn shared_face(&self, a: CellId, b: CellId) -> Option<Face> {
        let fa = self.cell_faces(a);
        let fb = self.cell_faces(b);
        fa.iter().find(|x| fb.iter().any(|y| y.face == x.face)).map(|x| x.face)
    }

    pub fn full_region(&self) -> Region {
        Region { cells: self.cells().collect() }
    }

    /// Builds a region, rejecting out-of-range indices.
    pub fn region<I: IntoIterator<Item = CellId>>(&self, cells: I) -> Result<Region, GeometryError> {
        let mut set = BTreeSet::new();
        for c in cells {
            if !self.contains_cell(c) {
                return Err(GeometryError::CellOutOfBounds(c.index()));
            }
            set.insert(c);
        }
        Ok(Region { cells: set })
    }

    pub fn region_at(&self, coords: &[[usize; 3]]) -> Result<Region, GeometryError> {
        let mut set = BTreeSet::new();
        for &c in coords {
            set.insert(self.cell(c).ok_or(GeometryError::CoordsOutOfBounds(c))?);
        }
        Ok(Region { cells: set })
    }

    pub fn validate_region(&self, region: &Region) -> Result<(), GeometryError> {
        match region.cells.iter().find(|c| !self.contains_cell(**c)) {
            Some(c) => Err(GeometryError::CellOutOfBounds(c.index())),
            None => Ok(()),
        }
    }

    pub fn validate_part(&self, part: &Part) -> Result<(), GeometryError> {
        if let Some(c) = part.cells.iter().find(|c| !self.contains_cell(**c)) {
            return Err(GeometryError::CellOutOfBounds(c.index()));
        }
        if let Some(f) = part.faces.iter().find(|f| !self.contains_face(f)) {
            return Err(GeometryError::FaceOutOfBounds(*f));
        }
        Ok(())
    }

    /// Membership mask over all grid cells.
    pub fn mask(&self, region: &Region) -> Vec<bool> {
        let mut m = vec![false; self.num_cells()];
        for c in &region.cells {
            m[c.index()] = true;
        }
        m
    }

    /// True iff the face has exactly one adjacent cell in `mask`.
    pub fn on_boundary(&self, face: &Face, mask: &[bool]) -> bool {
        let [lo, hi] = self.face_cells(face);
        let inside = |c: Option<CellId>| c.is_some_and(|c| mask[c.index()]);
        inside(lo) != inside(hi)
    }

    /// True iff the face touches at least one cell in `mask`.
    pub fn touches(&self, face: &Face, mask: &[bool]) -> bool {
        self.face_cells(face).iter().flatten().any(|c| mask[c.index()])
    }

    pub fn render_cell(&self, cell: CellId) -> String {
        let [x, y, z] = self.coords(cell);
        format!("{x},{y},{z}")
    }

    pub fn render_region(&self, region: &Region) -> String {
        let items: Vec<String> = region.cells.iter().map(|c| self.render_cell(*c)).collect();
        format!("{{{}}}", items.join(" "))
    }

    pub fn render_part(&self, part: &Part) -> String {
        let mut items: Vec<String> = part.cells.iter().map(|c| self.render_cell(*c)).collect();
        items.extend(part.faces.iter().map(|f| f.to_string()));
        format!("{{{}}}", items.join(" "))
    }

    pub fn render_atom(&self, atom: &Atom) -> String {
        match atom {
            Atom::Cell(c) => self.render_cell(*c),
            Atom::Face(f) => f.to_string(),
        }
    }
}

/// Closed union of grid cells.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Region {
    cells: BTreeSet<CellId>,
}

impl Region {
    pub fn empty() -> Self {
        Region::default()
    }

    /// Builds a region without bounds checks; see [`Grid::region`].
    pub fn from_cells<I: IntoIterator<Item = CellId>>(cells: I) -> Self {
        Region { cells: cells.into_iter().collect() }
    }

    pub fn cells(&self) -> &BTreeSet<CellId> {
        &self.cells
    }

    pub fn iter(&self) -> impl Iterator<Item = CellId> + '_ {
        self.cells.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: CellId) -> bool {
        self.cells.contains(&cell)
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.cells.is_subset(&other.cells)
    }

    pub fn union(&self, other: &Region) -> Region {
        Region { cells: self.cells.union(&other.cells).copied().collect() }
    }

    pub fn intersection(&self, other: &Region) -> Region {
        Region { cells: self.cells.intersection(&other.cells).copied().collect() }
    }

    pub fn difference(&self, other: &Region) -> Region {
        Region { cells: self.cells.difference(&other.cells).copied().collect() }
    }

    pub fn volume<T: Scalar>(&self, grid: &Grid<T>) -> T {
        T::lit(self.len() as f64) * grid.cell_volume()
    }

    /// The closed region as a part: its cells plus every face of those cells.
    pub fn closure<T: Scalar>(&self, grid: &Grid<T>) -> Part {
        let faces = self.cells.iter().flat_map(|c| grid.cell_faces(*c)).map(|f| f.face).collect();
        Part { cells: self.cells.clone(), faces }
    }

    /// Translates by an integer vector; `None` if any cell leaves the grid.
    pub fn translated<T: Scalar>(&self, grid: &Grid<T>, by: [isize; 3]) -> Option<Region> {
        let mut cells = BTreeSet::new();
        for c in &self.cells {
            let p = grid.coords(*c);
            let mut q = [0usize; 3];
            for k in 0..3 {
                let v = p[k] as isize + by[k];
                if v < 0 {
                    return None;
                }
                q[k] = v as usize;
            }
            cells.insert(grid.cell(q)?);
        }
        Some(Region { cells })
    }
}

/// Finite set of cells and faces.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Part {
    pub cells: BTreeSet<CellId>,
    pub faces: BTreeSet<Face>,
}

impl Part {
    pub fn new<C, F>(cells: C, faces: F) -> Self
    where
        C: IntoIterator<Item = CellId>,
        F: IntoIterator<Item = Face>,
    {
        Part { cells: cells.into_iter().collect(), faces: faces.into_iter().collect() }
    }

    pub fn empty() -> Self {
        Part::default()
    }

    pub fn atom(atom: Atom) -> Self {
        match atom {
            Atom::Cell(c) => Part::new([c], []),
            Atom::Face(f) => Part::new([], [f]),
        }
    }

    pub fn from_atoms<I: IntoIterator<Item = Atom>>(atoms: I) -> Self {
        let mut p = Part::empty();
        for a in atoms {
            p.insert(a);
        }
        p
    }

    pub fn insert(&mut self, atom: Atom) {
        match atom {
            Atom::Cell(c) => {
                self.cells.insert(c);
            }
            Atom::Face(f) => {
                self.faces.insert(f);
            }
        }
    }

    pub fn remove(&mut self, atom: &Atom) {
        match atom {
            Atom::Cell(c) => {
                self.cells.remove(c);
            }
            Atom::Face(f) => {
                self.faces.remove(f);
            }
        }
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        match atom {
            Atom::Cell(c) => self.cells.contains(c),
            Atom::Face(f) => self.faces.contains(f),
        }
    }

    pub fn atoms(&self) -> impl Iterator<Item = Atom> + '_ {
        self.cells.iter().map(|c| Atom::Cell(*c)).chain(self.faces.iter().map(|f| Atom::Face(*f)))
    }

    pub fn len(&self) -> usize {
        self.cells.len() + self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty() && self.faces.is_empty()
    }

    pub fn is_subset(&self, other: &Part) -> bool {
        self.cells.is_subset(&other.cells) && self.faces.is_subset(&other.faces)
    }

    pub fn is_disjoint(&self, other: &Part) -> bool {
        self.cells.is_disjoint(&other.cells) && self.faces.is_disjoint(&other.faces)
    }

    pub fn union(&self, other: &Part) -> Part {
        Part {
            cells: self.cells.union(&other.cells).copied().collect(),
            faces: self.faces.union(&other.faces).copied().collect(),
        }
    }

    pub fn difference(&self, other: &Part) -> Part {
        Part {
            cells: self.cells.difference(&other.cells).copied().collect(),
            faces: self.faces.difference(&other.faces).copied().collect(),
        }
    }

    pub fn cells_only(&self) -> Part {
        Part { cells: self.cells.clone(), faces: BTreeSet::new() }
    }

    pub fn faces_only(&self) -> Part {
        Part { cells: BTreeSet::new(), faces: self.faces.clone() }
    }

    pub fn is_mixed(&self) -> bool {
        !self.cells.is_empty() && !self.faces.is_empty()
    }

    pub fn volume<T: Scalar>(&self, grid: &Grid<T>) -> T {
        T::lit(self.cells.len() as f64) * grid.cell_volume()
    }

    pub fn area<T: Scalar>(&self, grid: &Grid<T>) -> T {
        T::lit(self.faces.len() as f64) * grid.face_area()
    }

    /// Splits off the faces lying on the boundary of `mask`: `(rest, on_boundary)`.
    pub fn split_boundary<T: Scalar>(&self, grid: &Grid<T>, mask: &[bool]) -> (Part, Part) {
        let (on, off): (BTreeSet<Face>, BTreeSet<Face>) =
            self.faces.iter().partition(|f| grid.on_boundary(f, mask));
        (Part { cells: self.cells.clone(), faces: off }, Part { cells: BTreeSet::new(), faces: on })
    }
}

/// Oriented face set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Surface {
    faces: BTreeMap<Face, Orientation>,
}

impl Surface {
    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn orientation(&self, face: &Face) -> Option<Orientation> {
        self.faces.get(face).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = OrientedFace> + '_ {
        self.faces.iter().map(|(f, o)| OrientedFace { face: *f, orientation: *o })
    }

    pub fn area<T: Scalar>(&self, grid: &Grid<T>) -> T {
        T::lit(self.len() as f64) * grid.face_area()
    }

    pub fn reversed(&self) -> Surface {
        Surface { faces: self.faces.iter().map(|(f, o)| (*f, o.reversed())).collect() }
    }

    pub fn to_part(&self) -> Part {
        Part::new([], self.faces.keys().copied())
    }

    /// Same support with identical orientations.
    pub fn is_positive_segment_of(&self, other: &Surface) -> bool {
        self.faces.iter().all(|(f, o)| other.faces.get(f) == Some(o))
    }
}

/// Closure of the complement of `a` in the grid.
pub fn exterior<T: Scalar>(a: &Region, grid: &Grid<T>) -> Result<Region, GeometryError> {
    grid.validate_region(a)?;
    Ok(Region { cells: grid.cells().filter(|c| !a.contains(*c)).collect() })
}

/// Closure of `b - a`, for `a` contained in `b`.
pub fn relative_exterior(a: &Region, b: &Region) -> Result<Region, GeometryError> {
    if !a.is_subset(b) {
        return Err(GeometryError::NotSubset);
    }
    Ok(b.difference(a))
}

/// `exterior(a) == relative_exterior(a, b) ∪ exterior(b)` as cell sets.
pub fn check_exterior_identity<T: Scalar>(
    a: &Region,
    b: &Region,
    grid: &Grid<T>,
) -> Result<bool, GeometryError> {
    grid.validate_region(b)?;
    let lhs = exterior(a, grid)?;
    let rhs = relative_exterior(a, b)?.union(&exterior(b, grid)?);
    Ok(lhs == rhs)
}

/// Faces with exactly one adjacent cell in `a`, oriented outward from `a`.
pub fn boundary_faces<T: Scalar>(a: &Region, grid: &Grid<T>) -> Surface {
    let mask = grid.mask(a);
    let mut faces = BTreeMap::new();
    for c in a.iter() {
        for of in grid.cell_faces(c) {
            if grid.on_boundary(&of.face, &mask) {
                faces.insert(of.face, of.orientation);
            }
        }
    }
    Surface { faces }
}

/// No shared cell and no shared face between the closed regions.
pub fn is_separate<T: Scalar>(a: &Region, c: &Region, grid: &Grid<T>) -> bool {
    a.iter().all(|x| !c.contains(x) && grid.neighbors(x).all(|n| !c.contains(n)))
}

/// A part is separate from a closed region if it contains none of the
/// region's cells and none of the faces bounding those cells.
pub fn part_separate_from<T: Scalar>(part: &Part, region_mask: &[bool], grid: &Grid<T>) -> bool {
    part.cells.iter().all(|c| !region_mask[c.index()])
        && part.faces.iter().all(|f| !grid.touches(f, region_mask))
}

/// Axis-aligned box of cells, `lo` inclusive and `hi` exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl CellBox {
    pub fn region<T: Scalar>(&self, grid: &Grid<T>) -> Region {
        let mut cells = BTreeSet::new();
        for z in self.lo[2]..self.hi[2] {
            for y in self.lo[1]..self.hi[1] {
                for x in self.lo[0]..self.hi[0] {
                    if let Some(c) = grid.cell([x, y, z]) {
                        cells.insert(c);
                    }
                }
            }
        }
        Region { cells }
    }
}

/// Every nonempty axis-aligned box of the grid.
pub fn all_boxes<T: Scalar>(grid: &Grid<T>) -> Vec<CellBox> {
    let ranges = |n: usize| -> Vec<(usize, usize)> {
        (0..n).flat_map(|lo| (lo + 1..=n).map(move |hi| (lo, hi))).collect()
    };
    let [nx, ny, nz] = grid.dims();
    let mut out = Vec::new();
    for &(x0, x1) in &ranges(nx) {
        for &(y0, y1) in &ranges(ny) {
            for &(z0, z1) in &ranges(nz) {
                out.push(CellBox { lo: [x0, y0, z0], hi: [x1, y1, z1] });
            }
        }
    }
    out
}

/// The subbody class of a body: every nonempty cell subset of it.
#[derive(Debug, Clone, Copy)]
pub struct SubbodyClass<'a> {
    pub body: &'a Region,
}

impl<'a> SubbodyClass<'a> {
    pub fn new(body: &'a Region) -> Self {
        SubbodyClass { body }
    }

    pub fn contains(&self, a: &Region) -> bool {
        !a.is_empty() && a.is_subset(self.body)
    }
}

fn subsets_of(cells: &[CellId]) -> impl Iterator<Item = Region> + '_ {
    let n = cells.len();
    (1u64..(1u64 << n)).map(move |mask| {
        Region::from_cells((0..n).filter(|i| mask >> i & 1 == 1).map(|i| cells[i]))
    })
}

fn exhaustive_limit(n: usize, cap: usize) -> bool {
    n < 63 && (1u64 << n) - 1 <= cap as u64
}

/// Every subbody of `b`, when there are at most `cap` of them.
pub fn subbody_class(b: &Region, cap: usize) -> Result<Vec<Region>, GeometryError> {
    if !exhaustive_limit(b.len(), cap) {
        return Err(GeometryError::TooLarge { what: "subbody class", cells: b.len(), cap });
    }
    let cells: Vec<CellId> = b.iter().collect();
    let mut out: Vec<Region> = subsets_of(&cells).collect();
    out.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
    Ok(out)
}

/// `d` belongs to the material universe of `body`: `d` or its exterior is a subbody.
pub fn in_material_universe<T: Scalar>(d: &Region, body: &Region, grid: &Grid<T>) -> bool {
    let class = SubbodyClass::new(body);
    if class.contains(d) {
        return true;
    }
    let ext = Region { cells: grid.cells().filter(|c| !d.contains(*c)).collect() };
    class.contains(&ext)
}

/// Every element of the material universe, when the subbody class fits in `cap`.
pub fn material_universe<T: Scalar>(
    b: &Region,
    grid: &Grid<T>,
    cap: usize,
) -> Result<Vec<Region>, GeometryError> {
    grid.validate_region(b)?;
    let subbodies = subbody_class(b, cap)?;
    let mut set: BTreeSet<Region> = BTreeSet::new();
    for a in subbodies {
        let ext = exterior(&a, grid)?;
        if !ext.is_empty() {
            set.insert(ext);
        }
        set.insert(a);
    }
    let mut out: Vec<Region> = set.into_iter().collect();
    out.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
    Ok(out)
}

/// Number of elements in the material universe of a body with `n` cells.
pub fn universe_size(n: usize, body_is_grid: bool) -> f64 {
    let subsets = 2f64.powi(n as i32) - 1.0;
    if body_is_grid {
        subsets
    } else {
        2.0 * subsets
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(d: [usize; 3]) -> Grid<f64> {
        Grid::new(d, 1.0).unwrap()
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(Grid::new([0, 1, 1], 1.0), Err(GeometryError::BadDims(_))));
        assert!(matches!(Grid::new([1, 1, 1], 0.0), Err(GeometryError::BadSpacing)));
        assert!(matches!(Grid::new([1, 1, 1], f64::NAN), Err(GeometryError::BadSpacing)));
    }

    #[test]
    fn cell_volume_and_face_area() {
        let grid = Grid::new([2, 1, 1], 0.5).unwrap();
        assert_eq!(grid.cell_volume(), 0.125);
        assert_eq!(grid.face_area(), 0.25);
        assert_eq!(grid.full_region().volume(&grid), 0.25);
    }

    #[test]
    fn coords_round_trip() {
        let grid = g([3, 2, 4]);
        for c in grid.cells() {
            assert_eq!(grid.cell(grid.coords(c)), Some(c));
        }
    }

    #[test]
    fn exterior_examples() {
        let grid = g([2, 2, 1]);
        assert_eq!(exterior(&Region::empty(), &grid).unwrap().len(), 4);
        assert!(exterior(&grid.full_region(), &grid).unwrap().is_empty());

        let bar = g([1, 1, 2]);
        let a = bar.region_at(&[[0, 0, 0]]).unwrap();
        assert_eq!(exterior(&a, &bar).unwrap(), bar.region_at(&[[0, 0, 1]]).unwrap());

        let bad = Region::from_cells([CellId(7)]);
        assert_eq!(exterior(&bad, &bar), Err(GeometryError::CellOutOfBounds(7)));
    }

    #[test]
    fn relative_exterior_examples() {
        let grid = g([2, 1, 1]);
        let b = grid.full_region();
        assert!(relative_exterior(&b, &b).unwrap().is_empty());
        assert_eq!(relative_exterior(&Region::empty(), &b).unwrap(), b);
        let first = grid.region_at(&[[0, 0, 0]]).unwrap();
        let second = grid.region_at(&[[1, 0, 0]]).unwrap();
        assert_eq!(relative_exterior(&first, &b).unwrap(), second);
        assert_eq!(relative_exterior(&b, &first), Err(GeometryError::NotSubset));
    }

    #[test]
    fn boundary_face_counts() {
        let cube = g([1, 1, 1]);
        let s = boundary_faces(&cube.full_region(), &cube);
        assert_eq!(s.len(), 6);
        assert_eq!(s.area(&cube), 6.0);

        let bar = g([1, 1, 2]);
        assert_eq!(boundary_faces(&bar.full_region(), &bar).len(), 10);

        // whole 2x2x2 grid: only border faces, 6 sides x 4
        let grid = g([2, 2, 2]);
        let s = boundary_faces(&grid.full_region(), &grid);
        assert_eq!(s.len(), 24);
        assert!(s.iter().all(|f| grid.face_cells(&f.face).iter().any(|c| c.is_none())));

        assert!(boundary_faces(&Region::empty(), &grid).is_empty());
    }

    #[test]
    fn boundary_orientation_is_outward() {
        let grid = g([2, 1, 1]);
        let a = grid.region_at(&[[0, 0, 0]]).unwrap();
        let s = boundary_faces(&a, &grid);
        let shared = Face::new(Axis::X, [1, 0, 0]);
        assert_eq!(s.orientation(&shared), Some(Orientation::Positive));
        let ext = exterior(&a, &grid).unwrap();
        assert_eq!(boundary_faces(&ext, &grid).orientation(&shared), Some(Orientation::Negative));
    }

    #[test]
    fn separateness() {
        let grid = g([2, 2, 1]);
        let a = grid.region_at(&[[0, 0, 0]]).unwrap();
        let diag = grid.region_at(&[[1, 1, 0]]).unwrap();
        let side = grid.region_at(&[[1, 0, 0]]).unwrap();
        assert!(!is_separate(&a, &a, &grid));
        assert!(is_separate(&a, &diag, &grid));
        assert!(!is_separate(&a, &side, &grid));
    }

    #[test]
    fn part_separation_uses_closure() {
        let grid = g([3, 1, 1]);
        let d = grid.region_at(&[[0, 0, 0]]).unwrap();
        let mask = grid.mask(&d);
        let mid = grid.cell([1, 0, 0]).unwrap();
        // the open middle cell is separate; its shared face with d is not
        assert!(part_separate_from(&Part::new([mid], []), &mask, &grid));
        let shared = Face::new(Axis::X, [1, 0, 0]);
        assert!(!part_separate_from(&Part::new([], [shared]), &mask, &grid));
    }

    #[test]
    fn subbody_counts_and_cap() {
        let grid = g([2, 1, 1]);
        assert_eq!(subbody_class(&grid.full_region(), 100).unwrap().len(), 3);
        let big = g([3, 3, 3]);
        assert!(matches!(
            subbody_class(&big.full_region(), 4096),
            Err(GeometryError::TooLarge { cells: 27, .. })
        ));
    }

    #[test]
    fn subbody_union_closure_exhaustive() {
        let grid = g([2, 2, 1]);
        let b = grid.full_region();
        let class = SubbodyClass::new(&b);
        let all = subbody_class(&b, 100).unwrap();
        for x in &all {
            for y in &all {
                assert!(class.contains(&x.union(y)));
            }
        }
    }

    #[test]
    fn boxes_meet_body_in_subbodies() {
        let grid = g([2, 2, 1]);
        let b = grid.region_at(&[[0, 0, 0], [1, 0, 0], [1, 1, 0]]).unwrap();
        let class = SubbodyClass::new(&b);
        let boxes = all_boxes(&grid);
        assert_eq!(boxes.len(), 9);
        for bx in boxes {
            let cut = bx.region(&grid).intersection(&b);
            assert!(cut.is_empty() || class.contains(&cut));
        }
    }

    #[test]
    fn universe_of_bar() {
        let bar = g([1, 1, 2]);
        let u = material_universe(&bar.full_region(), &bar, 100).unwrap();
        assert_eq!(u.len(), 3);
        assert!(u.iter().all(|d| !d.is_empty()));
        assert_eq!(universe_size(2, true), 3.0);
    }

    #[test]
    fn universe_contains_exteriors_outside_body() {
        let grid = g([3, 1, 1]);
        let b = grid.region_at(&[[0, 0, 0], [1, 0, 0]]).unwrap();
        let u = material_universe(&b, &grid, 100).unwrap();
        assert_eq!(u.len() as f64, universe_size(2, false));
        let d = grid.region_at(&[[1, 0, 0], [2, 0, 0]]).unwrap();
        assert!(!d.is_subset(&b));
        assert!(u.contains(&d));
        assert!(in_material_universe(&d, &b, &grid));
        let stray = grid.region_at(&[[2, 0, 0]]).unwrap();
        assert!(!in_material_universe(&stray, &b, &grid) || u.contains(&stray));
    }

    #[test]
    fn translation_stays_in_grid() {
        let grid = g([3, 1, 1]);
        let a = grid.region_at(&[[0, 0, 0]]).unwrap();
        assert_eq!(a.translated(&grid, [2, 0, 0]), Some(grid.region_at(&[[2, 0, 0]]).unwrap()));
        assert_eq!(a.translated(&grid, [3, 0, 0]), None);
        assert_eq!(a.translated(&grid, [-1, 0, 0]), None);
    }
}
