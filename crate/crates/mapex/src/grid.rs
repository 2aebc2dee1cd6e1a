//! Grid geometry: intersections, compass directions, and the canonical
//! edge indexing shared by every other module.
//!
//! Conventions: intersections are 0-indexed with x growing rightward and
//! y growing upward. Each undirected grid edge has a canonical form
//! `(intersection, East | North)`; edges are numbered row-major by
//! `(y, x, East-before-North)`, which is also the global tie-break order.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("grid dimensions must be at least 1x1, got {nx}x{ny}")]
    EmptyGrid { nx: usize, ny: usize },
    #[error("intersection ({x}, {y}) outside {nx}x{ny} grid")]
    OutOfBounds { x: usize, y: usize, nx: usize, ny: usize },
}

/// Compass direction of an incident corridor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub fn opposite(self) -> Direction {
        match self {
            Direction::North => Direction::South,
            Direction::East => Direction::West,
            Direction::South => Direction::North,
            Direction::West => Direction::East,
        }
    }

    /// Unit step as (dx, dy).
    pub fn delta(self) -> (isize, isize) {
        match self {
            Direction::North => (0, 1),
            Direction::East => (1, 0),
            Direction::South => (0, -1),
            Direction::West => (-1, 0),
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Direction::North => 1,
            Direction::East => 2,
            Direction::South => 4,
            Direction::West => 8,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Direction::North => 'N',
            Direction::East => 'E',
            Direction::South => 'S',
            Direction::West => 'W',
        }
    }

    pub fn from_letter(c: char) -> Option<Direction> {
        match c {
            'N' => Some(Direction::North),
            'E' => Some(Direction::East),
            'S' => Some(Direction::South),
            'W' => Some(Direction::West),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// A set of compass directions, packed into four bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct DirectionSet(u8);

impl DirectionSet {
    pub const EMPTY: DirectionSet = DirectionSet(0);

    pub fn from_bits(bits: u8) -> DirectionSet {
        DirectionSet(bits & 0x0f)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, d: Direction) -> bool {
        self.0 & d.bit() != 0
    }

    pub fn with(self, d: Direction) -> DirectionSet {
        DirectionSet(self.0 | d.bit())
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Direction> {
        Direction::ALL.into_iter().filter(move |d| self.contains(*d))
    }

    /// All subsets of this set, ascending by bit pattern.
    pub fn subsets(self) -> impl Iterator<Item = DirectionSet> {
        let mask = self.0;
        (0u8..16).filter(move |b| b & !mask == 0).map(DirectionSet)
    }
}

impl fmt::Display for DirectionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "-");
        }
        for d in self.iter() {
            write!(f, "{}", d.letter())?;
        }
        Ok(())
    }
}

/// A grid intersection. Ordering is the global `(y, x)` tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Intersection {
    pub x: usize,
    pub y: usize,
}

impl Intersection {
    pub fn new(x: usize, y: usize) -> Intersection {
        Intersection { x, y }
    }
}

impl PartialOrd for Intersection {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Intersection {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl fmt::Display for Intersection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Canonical index of a grid edge (see module docs for the numbering).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

/// A grid edge in canonical form: `a` plus its East or North neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridEdge {
    pub id: EdgeId,
    pub a: Intersection,
    pub direction: Direction, // East or North
}

impl GridEdge {
    pub fn b(&self) -> Intersection {
        let (dx, dy) = self.direction.delta();
        Intersection::new(
            (self.a.x as isize + dx) as usize,
            (self.a.y as isize + dy) as usize,
        )
    }
}

/// Dimensions of the corridor grid: `nx` vertical and `ny` horizontal lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize) -> Result<GridSpec, GridError> {
        if nx == 0 || ny == 0 {
            return Err(GridError::EmptyGrid { nx, ny });
        }
        Ok(GridSpec { nx, ny })
    }

    pub fn intersection_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Total possible corridor edges: `nx(ny-1) + ny(nx-1)`.
    pub fn edge_count(&self) -> usize {
        self.nx * (self.ny - 1) + self.ny * (self.nx - 1)
    }

    pub fn contains(&self, p: Intersection) -> bool {
        p.x < self.nx && p.y < self.ny
    }

    pub fn check(&self, p: Intersection) -> Result<(), GridError> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(GridError::OutOfBounds { x: p.x, y: p.y, nx: self.nx, ny: self.ny })
        }
    }

    /// Intersections in `(y, x)` order.
    pub fn intersections(&self) -> impl Iterator<Item = Intersection> + '_ {
        let nx = self.nx;
        (0..self.ny).flat_map(move |y| (0..nx).map(move |x| Intersection::new(x, y)))
    }

    pub fn intersection_index(&self, p: Intersection) -> usize {
        p.y * self.nx + p.x
    }

    pub fn neighbor(&self, p: Intersection, d: Direction) -> Option<Intersection> {
        let (dx, dy) = d.delta();
        let x = p.x as isize + dx;
        let y = p.y as isize + dy;
        if x < 0 || y < 0 {
            return None;
        }
        let q = Intersection::new(x as usize, y as usize);
        self.contains(q).then_some(q)
    }

    /// Directions that stay on the grid from `p`.
    pub fn valid_directions(&self, p: Intersection) -> DirectionSet {
        let mut set = DirectionSet::EMPTY;
        for d in Direction::ALL {
            if self.neighbor(p, d).is_some() {
                set = set.with(d);
            }
        }
        set
    }

    /// Edges in canonical order.
    pub fn edges(&self) -> Vec<GridEdge> {
        let mut out = Vec::with_capacity(self.edge_count());
        for p in self.intersections() {
            for d in [Direction::East, Direction::North] {
                if self.neighbor(p, d).is_some() {
                    out.push(GridEdge { id: EdgeId(out.len()), a: p, direction: d });
                }
            }
        }
        out
    }

    /// Canonical edge id for the edge leaving `p` in direction `d`,
    /// if that edge exists on the grid.
    pub fn edge_id(&self, p: Intersection, d: Direction) -> Option<EdgeId> {
        if !self.contains(p) || self.neighbor(p, d).is_none() {
            return None;
        }
        let (canon_p, canon_d) = match d {
            Direction::East | Direction::North => (p, d),
            Direction::West | Direction::South => (self.neighbor(p, d).unwrap(), d.opposite()),
        };
        // Count canonical edges preceding (canon_p, canon_d) in (y, x, E<N) order.
        let mut idx = 0;
        for q in self.intersections() {
            for dir in [Direction::East, Direction::North] {
                if self.neighbor(q, dir).is_none() {
                    continue;
                }
                if q == canon_p && dir == canon_d {
                    return Some(EdgeId(idx));
                }
                idx += 1;
            }
        }
        None
    }

    pub fn edge(&self, id: EdgeId) -> Option<GridEdge> {
        self.edges().into_iter().nth(id.0)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.nx, self.ny)
    }
}

/// Fixed-capacity bitset over canonical edge ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeSet {
    len: usize,
    blocks: Vec<u64>,
}

impl EdgeSet {
    pub fn empty(len: usize) -> EdgeSet {
        EdgeSet { len, blocks: vec![0; len.div_ceil(64)] }
    }

    pub fn full(len: usize) -> EdgeSet {
        let mut s = EdgeSet::empty(len);
        for i in 0..len {
            s.insert(EdgeId(i));
        }
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn contains(&self, id: EdgeId) -> bool {
        debug_assert!(id.0 < self.len);
        self.blocks[id.0 / 64] & (1u64 << (id.0 % 64)) != 0
    }

    pub fn insert(&mut self, id: EdgeId) {
        debug_assert!(id.0 < self.len);
        self.blocks[id.0 / 64] |= 1u64 << (id.0 % 64);
    }

    pub fn remove(&mut self, id: EdgeId) {
        debug_assert!(id.0 < self.len);
        self.blocks[id.0 / 64] &= !(1u64 << (id.0 % 64));
    }

    pub fn set(&mut self, id: EdgeId, present: bool) {
        if present {
            self.insert(id);
        } else {
            self.remove(id);
        }
    }

    pub fn count(&self) -> usize {
        self.blocks.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.len).map(EdgeId).filter(move |id| self.contains(*id))
    }

    pub fn intersect(&self, other: &EdgeSet) -> EdgeSet {
        debug_assert_eq!(self.len, other.len);
        EdgeSet {
            len: self.len,
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    pub fn overlaps(&self, other: &EdgeSet) -> bool {
        self.blocks.iter().zip(&other.blocks).any(|(a, b)| a & b != 0)
    }

    /// Interpret the low `len` bits of `mask` as an edge set.
    pub fn from_mask(len: usize, mask: u64) -> EdgeSet {
        assert!(len <= 64);
        let mut s = EdgeSet::empty(len);
        if len > 0 {
            s.blocks[0] = mask & if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        }
        s
    }
}

impl PartialOrd for EdgeSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EdgeSet {
    /// Numeric order of the edge bitmask (edge 0 = least significant bit).
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.blocks.iter().rev().zip(other.blocks.iter().rev()) {
            match a.cmp(b) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        std::cmp::Ordering::Equal
    }
}
