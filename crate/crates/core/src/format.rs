//! The line-oriented model file format.
//!
//! ```text
//! thermo-model 1
//! grid 1 1 2 1.0
//! time 0.0 0.1
//! body all
//! [energy 0]
//! cell 0,0,0 2.0
//! [heat_flux 0 kernel]
//! exchange 0,0,1 face fz:0,0,1 -1.0
//! [heat_flux 1 source 0,0,0]
//! face fz:0,0,1 1.0
//! ```
//!
//! A file holds either explicit tables or a single `[generator]` block with
//! reference-model parameters. Numbers are written in shortest round-trip
//! form, so `parse(emit(m)) == m` bit for bit. The full grammar is in the
//! repository README.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use crate::geometry::{in_material_universe, Atom, Axis, CellId, Face, Grid, Part, Region};
use crate::measure::GridMeasure;
use crate::refmodels::{generate_heat_grid, Bath, HeatParams, InitialField};
use crate::structure::{FluxFamily, FluxField, ThermoModel, TimeGrid};
use crate::Scalar;

pub const HEADER: &str = "thermo-model 1";

/// A located problem in a model file. Lines and columns start at 1; line 0
/// means the problem concerns the file as a whole.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// A parsed file: the model, plus the generator parameters when the file
/// was a generator block.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument<T> {
    pub generator: Option<HeatParams<T>>,
    pub model: ThermoModel<T>,
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let body = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in body.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token { text: &body[s..i], col: s + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &body[s..], col: s + 1 });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quantity {
    Energy,
    Entropy,
    HeatFlux,
    EntropyFlux,
}

impl Quantity {
    fn name(self) -> &'static str {
        match self {
            Quantity::Energy => "energy",
            Quantity::Entropy => "entropy",
            Quantity::HeatFlux => "heat_flux",
            Quantity::EntropyFlux => "entropy_flux",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Section {
    None,
    Measure { q: Quantity, k: usize },
    Kernel { q: Quantity, k: usize },
    Table { q: Quantity, k: usize, source: Region },
    Generator,
}

struct Parser<T> {
    diags: Vec<Diagnostic>,
    grid: Option<Grid<T>>,
    grid_line: usize,
    time: Option<Vec<T>>,
    time_line: usize,
    body: Option<(Vec<[usize; 3]>, bool, usize)>,
    measures: BTreeMap<(u8, usize), (GridMeasure<T>, usize)>,
    kernels: BTreeMap<(u8, usize), (FluxField<T>, usize)>,
    tables: BTreeMap<(u8, usize, Region), (GridMeasure<T>, usize)>,
    seen_atoms: BTreeSet<String>,
    generator: Option<GenBuilder<T>>,
    generator_line: usize,
    explicit_line: Option<usize>,
}

#[derive(Default)]
struct GenBuilder<T> {
    dims: Option<[usize; 3]>,
    spacing: Option<T>,
    heat_capacity: Option<T>,
    conductivity: Option<T>,
    radiative: Option<T>,
    radiators: Vec<([usize; 3], [usize; 3])>,
    bath: Option<Bath<T>>,
    body: Option<Vec<[usize; 3]>>,
    dt: Option<T>,
    steps: Option<usize>,
    seed: Option<u64>,
    initial: Option<InitialField<T>>,
}

fn qcode(q: Quantity) -> u8 {
    match q {
        Quantity::Energy => 0,
        Quantity::Entropy => 1,
        Quantity::HeatFlux => 2,
        Quantity::EntropyFlux => 3,
    }
}

fn parse_coords(s: &str) -> Option<[usize; 3]> {
    let mut it = s.split(',');
    let mut out = [0usize; 3];
    for slot in &mut out {
        *slot = it.next()?.parse().ok()?;
    }
    it.next().is_none().then_some(out)
}

fn parse_face(s: &str) -> Option<Face> {
    let rest = s.strip_prefix('f')?;
    let (axis, coords) = rest.split_once(':')?;
    let axis = match axis {
        "x" => Axis::X,
        "y" => Axis::Y,
        "z" => Axis::Z,
        _ => return None,
    };
    Some(Face::new(axis, parse_coords(coords)?))
}

impl<T: Scalar> Parser<T> {
    fn new() -> Self {
        Parser {
            diags: Vec::new(),
            grid: None,
            grid_line: 0,
            time: None,
            time_line: 0,
            body: None,
            measures: BTreeMap::new(),
            kernels: BTreeMap::new(),
            tables: BTreeMap::new(),
            seen_atoms: BTreeSet::new(),
            generator: None,
            generator_line: 0,
            explicit_line: None,
        }
    }

    fn err(&mut self, line: usize, col: usize, message: impl Into<String>) {
        self.diags.push(Diagnostic { line, col, message: message.into() });
    }

    fn number(&mut self, line: usize, tok: Token<'_>, what: &str) -> Option<T> {
        match tok.text.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.err(line, tok.col, format!("{what}: expected a number, found {:?}", tok.text));
                None
            }
        }
    }

    fn integer<I: std::str::FromStr>(&mut self, line: usize, tok: Token<'_>, what: &str) -> Option<I> {
        match tok.text.parse::<I>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.err(line, tok.col, format!("{what}: expected a nonnegative integer, found {:?}", tok.text));
                None
            }
        }
    }

    fn coords(&mut self, line: usize, tok: Token<'_>) -> Option<[usize; 3]> {
        let c = parse_coords(tok.text);
        if c.is_none() {
            self.err(line, tok.col, format!("expected cell coordinates x,y,z, found {:?}", tok.text));
        }
        c
    }

    fn cell(&mut self, line: usize, tok: Token<'_>) -> Option<CellId> {
        let c = self.coords(line, tok)?;
        let Some(grid) = &self.grid else {
            self.err(line, tok.col, "cell given before the grid line");
            return None;
        };
        match grid.cell(c) {
            Some(id) => Some(id),
            None => {
                self.err(line, tok.col, format!("cell {} lies outside the grid", tok.text));
                None
            }
        }
    }

    fn face(&mut self, line: usize, tok: Token<'_>) -> Option<Face> {
        let Some(f) = parse_face(tok.text) else {
            self.err(line, tok.col, format!("expected a face like fx:i,j,k, found {:?}", tok.text));
            return None;
        };
        let Some(grid) = &self.grid else {
            self.err(line, tok.col, "face given before the grid line");
            return None;
        };
        if !grid.contains_face(&f) {
            self.err(line, tok.col, format!("face {} lies outside the grid", tok.text));
            return None;
        }
        Some(f)
    }

    fn expect_len(&mut self, line: usize, toks: &[Token<'_>], n: usize, usage: &str) -> bool {
        if toks.len() != n {
            let col = toks.get(n.min(toks.len().saturating_sub(1))).map_or(1, |t| t.col);
            self.err(line, col, format!("expected `{usage}`"));
            false
        } else {
            true
        }
    }

    fn mark_explicit(&mut self, line: usize) {
        if self.explicit_line.is_none() {
            self.explicit_line = Some(line);
        }
    }

    fn header(&mut self, line: usize, toks: &[Token<'_>]) -> Section {
        let joined: Vec<&str> = toks.iter().map(|t| t.text).collect();
        let text = joined.join(" ");
        let inner = text.strip_prefix('[').and_then(|s| s.strip_suffix(']'));
        let Some(inner) = inner else {
            self.err(line, toks[0].col, "unterminated section header");
            return Section::None;
        };
        let parts: Vec<&str> = inner.split_whitespace().collect();
        let col = toks[0].col;
        if parts == ["generator"] {
            if self.generator.is_some() {
                self.err(line, col, "duplicate [generator] section");
            }
            self.generator = Some(GenBuilder::default());
            self.generator_line = line;
            return Section::Generator;
        }
        self.mark_explicit(line);
        let q = match parts.first().copied() {
            Some("energy") => Quantity::Energy,
            Some("entropy") => Quantity::Entropy,
            Some("heat_flux") => Quantity::HeatFlux,
            Some("entropy_flux") => Quantity::EntropyFlux,
            other => {
                self.err(line, col, format!("unknown section {:?}", other.unwrap_or("")));
                return Section::None;
            }
        };
        let Some(k) = parts.get(1).and_then(|s| s.parse::<usize>().ok()) else {
            self.err(line, col, format!("[{}] needs a time index", q.name()));
            return Section::None;
        };
        if let Some(t) = &self.time {
            if k >= t.len() {
                self.err(line, col, format!("time index {k} out of range: the time section has {} samples", t.len()));
                return Section::None;
            }
        }
        match (q, parts.get(2).copied()) {
            (Quantity::Energy | Quantity::Entropy, None) => {
                let key = (qcode(q), k);
                if self.measures.contains_key(&key) {
                    self.err(line, col, format!("duplicate [{} {k}] section", q.name()));
                    return Section::None;
                }
                self.measures.insert(key, (GridMeasure::new(), line));
                self.seen_atoms.clear();
                Section::Measure { q, k }
            }
            (Quantity::HeatFlux | Quantity::EntropyFlux, Some("kernel")) if parts.len() == 3 => {
                let key = (qcode(q), k);
                if self.kernels.contains_key(&key) {
                    self.err(line, col, format!("duplicate [{} {k} kernel] section", q.name()));
                    return Section::None;
                }
                self.kernels.insert(key, (FluxField::new(), line));
                self.seen_atoms.clear();
                Section::Kernel { q, k }
            }
            (Quantity::HeatFlux | Quantity::EntropyFlux, Some("source")) => {
                let mut cells = Vec::new();
                for p in &parts[3..] {
                    match parse_coords(p) {
                        Some(c) => cells.push(c),
                        None => {
                            self.err(line, col, format!("bad source cell {p:?}"));
                            return Section::None;
                        }
                    }
                }
                let Some(grid) = &self.grid else {
                    self.err(line, col, "flux table given before the grid line");
                    return Section::None;
                };
                let source = match grid.region_at(&cells) {
                    Ok(r) if !r.is_empty() => r,
                    _ => {
                        self.err(line, col, "source region is empty or outside the grid");
                        return Section::None;
                    }
                };
                if let Some((body_cells, all, _)) = &self.body {
                    let body = if *all { grid.full_region() } else { grid.region_at(body_cells).unwrap_or_default() };
                    if !body.is_empty() && !in_material_universe(&source, &body, grid) {
                        self.err(
                            line,
                            col,
                            format!("unknown source region {}: not in the material universe", grid.render_region(&source)),
                        );
                        return Section::None;
                    }
                }
                let key = (qcode(q), k, source.clone());
                if self.tables.contains_key(&key) {
                    self.err(line, col, "duplicate flux table for this source and time");
                    return Section::None;
                }
                self.tables.insert(key, (GridMeasure::new(), line));
                self.seen_atoms.clear();
                Section::Table { q, k, source }
            }
            _ => {
                self.err(line, col, format!("malformed [{}] header", q.name()));
                Section::None
            }
        }
    }

    fn duplicate(&mut self, line: usize, col: usize, key: String) -> bool {
        if !self.seen_atoms.insert(key.clone()) {
            self.err(line, col, format!("duplicate entry {key}"));
            true
        } else {
            false
        }
    }

    fn entry_part(&mut self, line: usize, toks: &[Token<'_>]) -> Option<Part> {
        let text: Vec<&str> = toks.iter().map(|t| t.text).collect();
        let text = text.join(" ");
        let col = toks.first().map_or(1, |t| t.col);
        let Some(inner) = text.strip_prefix('{').and_then(|s| s.strip_suffix('}')) else {
            self.err(line, col, "entry part must be written {atom atom ...}");
            return None;
        };
        let mut part = Part::empty();
        for a in inner.split_whitespace() {
            let tok = Token { text: a, col };
            if a.starts_with('f') {
                part.insert(Atom::Face(self.face(line, tok)?));
            } else {
                part.insert(Atom::Cell(self.cell(line, tok)?));
            }
        }
        Some(part)
    }

    fn measure_line(&mut self, line: usize, toks: &[Token<'_>]) -> Option<(Option<Atom>, Option<Part>, T)> {
        match toks[0].text {
            "cell" => {
                if !self.expect_len(line, toks, 3, "cell x,y,z value") {
                    return None;
                }
                let c = self.cell(line, toks[1]);
                let v = self.number(line, toks[2], "cell value");
                if self.duplicate(line, toks[1].col, format!("cell {}", toks[1].text)) {
                    return None;
                }
                Some((Some(Atom::Cell(c?)), None, v?))
            }
            "face" => {
                if !self.expect_len(line, toks, 3, "face fA:i,j,k value") {
                    return None;
                }
                let f = self.face(line, toks[1]);
                let v = self.number(line, toks[2], "face value");
                if self.duplicate(line, toks[1].col, format!("face {}", toks[1].text)) {
                    return None;
                }
                Some((Some(Atom::Face(f?)), None, v?))
            }
            "entry" => {
                if toks.len() < 3 {
                    self.err(line, toks[0].col, "expected `entry {atoms} value`");
                    return None;
                }
                let last = toks[toks.len() - 1];
                let p = self.entry_part(line, &toks[1..toks.len() - 1]);
                let v = self.number(line, last, "entry value");
                let p = p?;
                if let Some(grid) = &self.grid {
                    let key = format!("entry {}", grid.render_part(&p));
                    if self.duplicate(line, toks[1].col, key) {
                        return None;
                    }
                }
                Some((None, Some(p), v?))
            }
            other => {
                self.err(line, toks[0].col, format!("expected cell, face or entry, found {other:?}"));
                None
            }
        }
    }

    fn apply_measure(m: &mut GridMeasure<T>, atom: Option<Atom>, part: Option<Part>, v: T) {
        match (atom, part) {
            (Some(Atom::Cell(c)), _) => m.set_cell(c, v),
            (Some(Atom::Face(f)), _) => m.set_face(f, v),
            (None, Some(p)) => m.set_entry(p, v),
            (None, None) => {}
        }
    }

    fn kernel_line(&mut self, line: usize, toks: &[Token<'_>], q: Quantity, k: usize) {
        if toks[0].text != "exchange" {
            self.err(line, toks[0].col, format!("expected `exchange`, found {:?}", toks[0].text));
            return;
        }
        if !self.expect_len(line, toks, 5, "exchange <source x,y,z> cell|face <target> value") {
            return;
        }
        let src = self.cell(line, toks[1]);
        let target = match toks[2].text {
            "cell" => self.cell(line, toks[3]).map(Atom::Cell),
            "face" => self.face(line, toks[3]).map(Atom::Face),
            other => {
                self.err(line, toks[2].col, format!("expected cell or face, found {other:?}"));
                None
            }
        };
        let v = self.number(line, toks[4], "exchange value");
        let key = format!("exchange {} {} {}", toks[1].text, toks[2].text, toks[3].text);
        if self.duplicate(line, toks[1].col, key) {
            return;
        }
        if let (Some(src), Some(target), Some(v)) = (src, target, v) {
            if let Some((field, _)) = self.kernels.get_mut(&(qcode(q), k)) {
                field.set(target, src, v);
            }
        }
    }

    fn preamble_line(&mut self, line: usize, toks: &[Token<'_>]) {
        match toks[0].text {
            "grid" => {
                self.mark_explicit(line);
                if self.grid.is_some() {
                    self.err(line, toks[0].col, "duplicate grid line");
                    return;
                }
                if !self.expect_len(line, toks, 5, "grid nx ny nz h") {
                    return;
                }
                let dims: Vec<Option<usize>> = (1..4).map(|i| self.integer(line, toks[i], "grid dimension")).collect();
                let h = self.number(line, toks[4], "grid spacing");
                if let (Some(x), Some(y), Some(z), Some(h)) = (dims[0], dims[1], dims[2], h) {
                    match Grid::new([x, y, z], h) {
                        Ok(g) => {
                            self.grid = Some(g);
                            self.grid_line = line;
                        }
                        Err(e) => self.err(line, toks[0].col, format!("grid: {e}")),
                    }
                }
            }
            "time" => {
                self.mark_explicit(line);
                if self.time.is_some() {
                    self.err(line, toks[0].col, "duplicate time line");
                    return;
                }
                let mut samples = Vec::new();
                let mut ok = true;
                for t in &toks[1..] {
                    match self.number(line, *t, "time sample") {
                        Some(v) => {
                            if let Some(prev) = samples.last() {
                                if v == *prev {
                                    self.err(line, t.col, format!("time: duplicated time sample {}", t.text));
                                    ok = false;
                                } else if !(v > *prev) {
                                    self.err(line, t.col, "time: samples must be strictly increasing");
                                    ok = false;
                                }
                            }
                            if !v.is_finite() {
                                self.err(line, t.col, "time: samples must be finite");
                                ok = false;
                            }
                            samples.push(v);
                        }
                        None => ok = false,
                    }
                }
                if samples.is_empty() {
                    self.err(line, toks[0].col, "time: at least one sample is required");
                    ok = false;
                }
                if ok {
                    self.time = Some(samples);
                    self.time_line = line;
                }
            }
            "body" => {
                self.mark_explicit(line);
                if self.body.is_some() {
                    self.err(line, toks[0].col, "duplicate body line");
                    return;
                }
                if toks.len() == 2 && toks[1].text == "all" {
                    self.body = Some((Vec::new(), true, line));
                    return;
                }
                let mut cells = Vec::new();
                for t in &toks[1..] {
                    if let Some(c) = self.coords(line, *t) {
                        if let Some(g) = &self.grid {
                            if g.cell(c).is_none() {
                                self.err(line, t.col, format!("body cell {} lies outside the grid", t.text));
                                continue;
                            }
                        }
                        cells.push(c);
                    }
                }
                if cells.is_empty() {
                    self.err(line, toks[0].col, "body: at least one cell is required");
                }
                self.body = Some((cells, false, line));
            }
            other => self.err(line, toks[0].col, format!("unexpected {other:?} outside a section")),
        }
    }

    fn generator_line(&mut self, line: usize, toks: &[Token<'_>]) {
        let key = toks[0].text;
        let args = &toks[1..];
        let mut g = self.generator.take().unwrap_or_default();
        let want = |p: &mut Self, n: usize, usage: &str| -> bool {
            if args.len() != n {
                p.err(line, toks[0].col, format!("expected `{usage}`"));
                false
            } else {
                true
            }
        };
        match key {
            "dims" => {
                if want(self, 3, "dims nx ny nz") {
                    let d: Vec<Option<usize>> = args.iter().map(|t| self.integer(line, *t, "dims")).collect();
                    if let (Some(x), Some(y), Some(z)) = (d[0], d[1], d[2]) {
                        g.dims = Some([x, y, z]);
                    }
                }
            }
            "spacing" | "heat_capacity" | "conductivity" | "radiative" | "dt" => {
                if want(self, 1, &format!("{key} value")) {
                    let v = self.number(line, args[0], key);
                    let slot = match key {
                        "spacing" => &mut g.spacing,
                        "heat_capacity" => &mut g.heat_capacity,
                        "conductivity" => &mut g.conductivity,
                        "radiative" => &mut g.radiative,
                        _ => &mut g.dt,
                    };
                    *slot = v;
                }
            }
            "steps" => {
                if want(self, 1, "steps n") {
                    g.steps = self.integer(line, args[0], "steps");
                }
            }
            "seed" => {
                if want(self, 1, "seed n") {
                    g.seed = self.integer(line, args[0], "seed");
                }
            }
            "radiator" => {
                if want(self, 2, "radiator x,y,z x,y,z") {
                    if let (Some(a), Some(b)) = (self.coords(line, args[0]), self.coords(line, args[1])) {
                        g.radiators.push((a, b));
                    }
                }
            }
            "bath" => {
                if want(self, 2, "bath x,y,z capacity") {
                    if let (Some(c), Some(cap)) = (self.coords(line, args[0]), self.number(line, args[1], "bath capacity")) {
                        g.bath = Some(Bath { cell: c, capacity: cap });
                    }
                }
            }
            "body" => {
                let cells: Vec<[usize; 3]> = args.iter().filter_map(|t| self.coords(line, *t)).collect();
                if cells.is_empty() {
                    self.err(line, toks[0].col, "body: at least one cell is required");
                } else {
                    g.body = Some(cells);
                }
            }
            "initial" => match args.first().map(|t| t.text) {
                Some("random") if args.len() == 3 => {
                    if let (Some(lo), Some(hi)) = (self.number(line, args[1], "lo"), self.number(line, args[2], "hi")) {
                        g.initial = Some(InitialField::Random { lo, hi });
                    }
                }
                Some("uniform") if args.len() == 2 => {
                    if let Some(v) = self.number(line, args[1], "temperature") {
                        g.initial = Some(InitialField::Uniform(v));
                    }
                }
                Some("values") if args.len() >= 2 => {
                    let vals: Vec<Option<T>> = args[1..].iter().map(|t| self.number(line, *t, "temperature")).collect();
                    if vals.iter().all(|v| v.is_some()) {
                        g.initial = Some(InitialField::Values(vals.into_iter().flatten().collect()));
                    }
                }
                _ => self.err(line, toks[0].col, "expected `initial random lo hi`, `initial uniform t` or `initial values t...`"),
            },
            other => self.err(line, toks[0].col, format!("unknown generator key {other:?}")),
        }
        self.generator = Some(g);
    }

    fn finish_generator(&mut self) -> Option<HeatParams<T>> {
        let g = self.generator.take()?;
        let line = self.generator_line;
        let (Some(dims), Some(dt), Some(steps)) = (g.dims, g.dt, g.steps) else {
            self.err(line, 1, "[generator] requires dims, dt and steps");
            return None;
        };
        Some(HeatParams {
            dims,
            spacing: g.spacing.unwrap_or_else(T::one),
            heat_capacity: g.heat_capacity.unwrap_or_else(T::one),
            conductivity: g.conductivity.unwrap_or_else(T::one),
            radiative: g.radiative.unwrap_or_else(T::zero),
            radiators: g.radiators,
            bath: g.bath,
            body: g.body,
            dt,
            steps,
            seed: g.seed.unwrap_or(0),
            initial: g.initial.unwrap_or(InitialField::Random { lo: T::one(), hi: T::lit(2.0) }),
        })
    }

    fn finish_explicit(&mut self) -> Option<ThermoModel<T>> {
        let Some(grid) = self.grid.clone() else {
            self.err(0, 0, "missing grid line");
            return None;
        };
        let Some(samples) = self.time.clone() else {
            self.err(0, 0, "missing or invalid time line");
            return None;
        };
        let Some((cells, all, body_line)) = self.body.clone() else {
            self.err(0, 0, "missing body line");
            return None;
        };
        let body = if all { grid.full_region() } else { grid.region_at(&cells).ok()? };
        let n = samples.len();
        let time = match TimeGrid::new(samples) {
            Ok(t) => t,
            Err(e) => {
                self.err(self.time_line, 1, format!("time: {e}"));
                return None;
            }
        };
        let series = |q: Quantity, this: &mut Self| -> Vec<GridMeasure<T>> {
            (0..n)
                .map(|k| match this.measures.remove(&(qcode(q), k)) {
                    Some((m, _)) => m,
                    None => {
                        this.err(0, 0, format!("missing [{} {k}] section", q.name()));
                        GridMeasure::new()
                    }
                })
                .collect()
        };
        let energy = series(Quantity::Energy, self);
        let entropy = series(Quantity::Entropy, self);
        let family = |q: Quantity, this: &mut Self| -> FluxFamily<T> {
            let code = qcode(q);
            let has_kernel = this.kernels.keys().any(|(c, _)| *c == code);
            let mut tables = vec![BTreeMap::new(); n];
            let keys: Vec<_> = this.tables.keys().filter(|(c, _, _)| *c == code).cloned().collect();
            for key in keys {
                let (m, _) = this.tables.remove(&key).expect("key present");
                tables[key.1].insert(key.2, m);
            }
            let kernel = has_kernel.then(|| {
                (0..n).map(|k| this.kernels.remove(&(code, k)).map(|(f, _)| f).unwrap_or_default()).collect()
            });
            FluxFamily { kernel, tables }
        };
        let heat = family(Quantity::HeatFlux, self);
        let ent = family(Quantity::EntropyFlux, self);
        if !self.diags.is_empty() {
            return None;
        }
        match ThermoModel::new(grid, body, time, energy, entropy, heat, ent) {
            Ok(m) => Some(m),
            Err(e) => {
                self.err(body_line.max(self.grid_line), 1, format!("model: {e}"));
                None
            }
        }
    }
}

/// Parses a model file, generating the model when the file holds a
/// `[generator]` block.
pub fn parse_document<T: Scalar>(text: &str) -> Result<ModelDocument<T>, ParseError> {
    let mut p = Parser::<T>::new();
    let mut section = Section::None;
    let mut saw_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks = tokenize(raw);
        if toks.is_empty() {
            continue;
        }
        if !saw_header {
            saw_header = true;
            let words: Vec<&str> = toks.iter().map(|t| t.text).collect();
            if words.join(" ") != HEADER {
                p.err(line, toks[0].col, format!("expected header `{HEADER}`"));
            }
            continue;
        }
        if toks[0].text.starts_with('[') {
            section = p.header(line, &toks);
            continue;
        }
        match section.clone() {
            Section::None => p.preamble_line(line, &toks),
            Section::Generator => p.generator_line(line, &toks),
            Section::Measure { q, k } => {
                if let Some((atom, part, v)) = p.measure_line(line, &toks) {
                    if let Some((m, _)) = p.measures.get_mut(&(qcode(q), k)) {
                        Parser::apply_measure(m, atom, part, v);
                    }
                }
            }
            Section::Table { q, k, source } => {
                if let Some((atom, part, v)) = p.measure_line(line, &toks) {
                    if let Some((m, _)) = p.tables.get_mut(&(qcode(q), k, source)) {
                        Parser::apply_measure(m, atom, part, v);
                    }
                }
            }
            Section::Kernel { q, k } => p.kernel_line(line, &toks, q, k),
        }
    }
    if !saw_header {
        p.err(1, 1, format!("empty file: expected header `{HEADER}`"));
    }
    if p.generator.is_some() {
        if let Some(l) = p.explicit_line {
            p.err(l, 1, "a file holds either explicit tables or a [generator] block, not both");
        }
        let params = p.finish_generator();
        if !p.diags.is_empty() {
            return Err(ParseError { diagnostics: p.diags });
        }
        let params = params.expect("no diagnostics implies parameters");
        return match generate_heat_grid(&params) {
            Ok(model) => Ok(ModelDocument { generator: Some(params), model }),
            Err(e) => Err(ParseError {
                diagnostics: vec![Diagnostic { line: p.generator_line, col: 1, message: format!("generator: {e}") }],
            }),
        };
    }
    let model = p.finish_explicit();
    match model {
        Some(model) if p.diags.is_empty() => Ok(ModelDocument { generator: None, model }),
        _ => Err(ParseError { diagnostics: p.diags }),
    }
}

pub fn parse_model<T: Scalar>(text: &str) -> Result<ThermoModel<T>, ParseError> {
    parse_document(text).map(|d| d.model)
}

fn coords(c: [usize; 3]) -> String {
    format!("{},{},{}", c[0], c[1], c[2])
}

fn write_measure<T: Scalar>(out: &mut String, grid: &Grid<T>, m: &GridMeasure<T>) {
    for (c, v) in m.cell_densities() {
        let _ = writeln!(out, "cell {} {:?}", grid.render_cell(*c), v);
    }
    for (f, v) in m.face_densities() {
        let _ = writeln!(out, "face {f} {v:?}");
    }
    for (p, v) in m.entries() {
        let _ = writeln!(out, "entry {} {:?}", grid.render_part(p), v);
    }
}

fn write_family<T: Scalar>(out: &mut String, grid: &Grid<T>, name: &str, fam: &FluxFamily<T>) {
    for k in 0..fam.len() {
        if let Some(kern) = fam.kernel() {
            let _ = writeln!(out, "[{name} {k} kernel]");
            for (atom, src, v) in kern[k].iter() {
                let target = match atom {
                    Atom::Cell(c) => format!("cell {}", grid.render_cell(c)),
                    Atom::Face(f) => format!("face {f}"),
                };
                let _ = writeln!(out, "exchange {} {target} {v:?}", grid.render_cell(src));
            }
        }
        for (d, m) in &fam.tables()[k] {
            let cells: Vec<String> = d.iter().map(|c| grid.render_cell(c)).collect();
            let _ = writeln!(out, "[{name} {k} source {}]", cells.join(" "));
            write_measure(out, grid, m);
        }
    }
}

/// Writes a model as explicit tables.
pub fn emit_model<T: Scalar>(model: &ThermoModel<T>) -> String {
    let grid = model.grid();
    let mut out = String::new();
    let [nx, ny, nz] = grid.dims();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "grid {nx} {ny} {nz} {:?}", grid.spacing());
    let times: Vec<String> = model.time().samples().iter().map(|t| format!("{t:?}")).collect();
    let _ = writeln!(out, "time {}", times.join(" "));
    if model.body().len() == grid.num_cells() {
        let _ = writeln!(out, "body all");
    } else {
        let cells: Vec<String> = model.body().iter().map(|c| grid.render_cell(c)).collect();
        let _ = writeln!(out, "body {}", cells.join(" "));
    }
    for (name, series) in [("energy", model.energy_series()), ("entropy", model.entropy_series())] {
        for (k, m) in series.iter().enumerate() {
            let _ = writeln!(out, "[{name} {k}]");
            write_measure(&mut out, grid, m);
        }
    }
    write_family(&mut out, grid, "heat_flux", model.heat_flux_family());
    write_family(&mut out, grid, "entropy_flux", model.entropy_flux_family());
    out
}

/// Writes generator parameters as a `[generator]` file.
pub fn emit_generator<T: Scalar>(p: &HeatParams<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "[generator]");
    let _ = writeln!(out, "dims {} {} {}", p.dims[0], p.dims[1], p.dims[2]);
    let _ = writeln!(out, "spacing {:?}", p.spacing);
    let _ = writeln!(out, "heat_capacity {:?}", p.heat_capacity);
    let _ = writeln!(out, "conductivity {:?}", p.conductivity);
    let _ = writeln!(out, "radiative {:?}", p.radiative);
    for (a, b) in &p.radiators {
        let _ = writeln!(out, "radiator {} {}", coords(*a), coords(*b));
    }
    if let Some(b) = &p.bath {
        let _ = writeln!(out, "bath {} {:?}", coords(b.cell), b.capacity);
    }
    if let Some(body) = &p.body {
        let cells: Vec<String> = body.iter().map(|c| coords(*c)).collect();
        let _ = writeln!(out, "body {}", cells.join(" "));
    }
    let _ = writeln!(out, "dt {:?}", p.dt);
    let _ = writeln!(out, "steps {}", p.steps);
    let _ = writeln!(out, "seed {}", p.seed);
    match &p.initial {
        InitialField::Random { lo, hi } => {
            let _ = writeln!(out, "initial random {lo:?} {hi:?}");
        }
        InitialField::Uniform(v) => {
            let _ = writeln!(out, "initial uniform {v:?}");
        }
        InitialField::Values(vs) => {
            let vals: Vec<String> = vs.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "initial values {}", vals.join(" "));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refmodels::{mutate, MutationTarget};

    #[test]
    fn tokens_carry_columns() {
        let t = tokenize("  cell 0,0,0   1.5 # note");
        assert_eq!(t.len(), 3);
        assert_eq!((t[0].text, t[0].col), ("cell", 3));
        assert_eq!((t[2].text, t[2].col), ("1.5", 16));
    }

    #[test]
    fn explicit_round_trip() {
        let m = generate_heat_grid(&HeatParams::<f64>::mutation_scenario(2)).unwrap();
        for t in [MutationTarget::T4, MutationTarget::T8, MutationTarget::Decomp] {
            let mm = mutate(&m, t).unwrap();
            let text = emit_model(&mm);
            let back: ThermoModel<f64> = parse_model(&text).unwrap();
            assert_eq!(back, mm);
            assert_eq!(emit_model(&back), text);
        }
    }

    #[test]
    fn generator_file_matches_direct_generation() {
        let p = HeatParams::<f64>::mutation_scenario(5);
        let doc: ModelDocument<f64> = parse_document(&emit_generator(&p)).unwrap();
        assert_eq!(doc.generator.as_ref(), Some(&p));
        assert_eq!(doc.model, generate_heat_grid(&p).unwrap());
    }

    #[test]
    fn duplicated_time_sample_names_time() {
        let text = "thermo-model 1\ngrid 1 1 1 1.0\ntime 0.0 0.1 0.1\nbody all\n";
        let err = parse_model::<f64>(text).unwrap_err();
        let d = &err.diagnostics[0];
        assert_eq!((d.line, d.col), (3, 14));
        assert!(d.message.starts_with("time:"), "{}", d.message);
    }

    #[test]
    fn unknown_source_is_reported() {
        let text = "thermo-model 1\ngrid 4 1 1 1.0\ntime 0.0 1.0\nbody 0,0,0 1,0,0\n\
                    [heat_flux 0 source 2,0,0]\ncell 0,0,0 1.0\n";
        let err = parse_model::<f64>(text).unwrap_err();
        assert!(err.diagnostics.iter().any(|d| d.line == 5 && d.message.contains("unknown source")), "{err}");
    }

    #[test]
    fn several_errors_are_collected() {
        let text = "thermo-model 1\ngrid 2 1 1 1.0\ntime 0.0 1.0\nbody all\n[energy 0]\ncell 9,0,0 1.0\ncell 0,0,0 x\nbogus\n";
        let err = parse_model::<f64>(text).unwrap_err();
        let lines: Vec<usize> = err.diagnostics.iter().map(|d| d.line).collect();
        assert!(lines.contains(&6) && lines.contains(&7) && lines.contains(&8), "{err}");
    }

    #[test]
    fn generator_and_tables_are_exclusive() {
        let text = "thermo-model 1\ngrid 1 1 2 1.0\n[generator]\ndims 1 1 2\ndt 0.1\nsteps 2\n";
        let err = parse_model::<f64>(text).unwrap_err();
        assert!(err.diagnostics[0].message.contains("not both"));
    }

    #[test]
    fn bad_header() {
        let err = parse_model::<f64>("thermo-model 2\n").unwrap_err();
        assert_eq!(err.diagnostics[0].line, 1);
    }
}
