//! Text field dumps and CSV records.
//!
//! A dump is a header line `d N kind` followed by one value per line in the mesh
//! flattening order. `kind` is `cell`, `staggered-i` (component `i` of a face field)
//! or `tensor`, whose payload is the entry blocks in order `i * d + j`.
//!
//! Floats are written as `{:.16e}`, 17 significant digits, so every binary64 value
//! parses back to itself.

use std::io::{BufRead, Write};

use crate::analysis::consistency::ConsistencyReport;
use crate::analysis::eoc::{EocLevel, EocTable};
use crate::analysis::rates::RatePrediction;
use crate::error::{Error, Result};
use crate::fields::{CellField, CellVectorField, StaggeredField, TensorField};
use crate::identities::{IdentityResidual, Relation};
use crate::mesh::Mesh;
use crate::schemes::StepReport;
use crate::state::{FluidState, SchemeKind, Velocity};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("{what}: `{s}` is not a number")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Parse(format!("{what}: `{s}` is not a count")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DumpKind {
    Cell,
    Staggered(usize),
    Tensor,
}

impl DumpKind {
    fn label(self) -> String {
        match self {
            DumpKind::Cell => "cell".into(),
            DumpKind::Staggered(i) => format!("staggered-{i}"),
            DumpKind::Tensor => "tensor".into(),
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "cell" => Ok(DumpKind::Cell),
            "tensor" => Ok(DumpKind::Tensor),
            _ => s
                .strip_prefix("staggered-")
                .and_then(|i| i.parse().ok())
                .map(DumpKind::Staggered)
                .ok_or_else(|| Error::Parse(format!("unknown dump kind `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dump {
    pub mesh: Mesh,
    pub kind: DumpKind,
    pub values: Vec<f64>,
}

impl Dump {
    pub fn cell(f: &CellField) -> Self {
        Dump { mesh: *f.mesh(), kind: DumpKind::Cell, values: f.values().to_vec() }
    }

    pub fn staggered(u: &StaggeredField, i: usize) -> Self {
        Dump { mesh: *u.mesh(), kind: DumpKind::Staggered(i), values: u.component(i).to_vec() }
    }

    pub fn tensor(t: &TensorField) -> Self {
        Dump { mesh: *t.mesh(), kind: DumpKind::Tensor, values: t.entries().concat() }
    }

    fn expected_len(mesh: &Mesh, kind: DumpKind) -> usize {
        match kind {
            DumpKind::Cell | DumpKind::Staggered(_) => mesh.cell_count(),
            DumpKind::Tensor => mesh.dim() * mesh.dim() * mesh.cell_count(),
        }
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{} {} {}", self.mesh.dim(), self.mesh.n(), self.kind.label())?;
        for v in &self.values {
            writeln!(w, "{}", fmt_f64(*v))?;
        }
        Ok(())
    }

    pub fn read(r: &mut impl BufRead) -> Result<Self> {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Parse("missing dump header".into()));
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("bad dump header `{}`", line.trim())));
        }
        let mesh = Mesh::new(parse_usize(parts[0], "d")?, parse_usize(parts[1], "N")?)?;
        let kind = DumpKind::parse(parts[2])?;
        if let DumpKind::Staggered(i) = kind {
            if i >= mesh.dim() {
                return Err(Error::Parse(format!("staggered component {i} in dimension {}", mesh.dim())));
            }
        }
        let len = Self::expected_len(&mesh, kind);
        let mut values = Vec::with_capacity(len);
        for k in 0..len {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Parse(format!("dump ended after {k} of {len} values")));
            }
            values.push(parse_f64(&line, "dump value")?);
        }
        Ok(Dump { mesh, kind, values })
    }

    pub fn into_cell(self) -> Result<CellField> {
        match self.kind {
            DumpKind::Cell => CellField::new(self.mesh, self.values),
            _ => Err(Error::Parse(format!("expected a cell dump, found {}", self.kind.label()))),
        }
    }

    pub fn into_tensor(self) -> Result<TensorField> {
        if self.kind != DumpKind::Tensor {
            return Err(Error::Parse(format!("expected a tensor dump, found {}", self.kind.label())));
        }
        let n = self.mesh.cell_count();
        let entries = self.values.chunks(n).map(<[f64]>::to_vec).collect();
        Ok(TensorField::from_entries(self.mesh, entries))
    }
}

/// Checkpoint: a line `state <scheme> <t>`, the density dump, then one dump per
/// velocity component (`cell` for FV, `staggered-i` for MAC).
pub fn write_state(w: &mut impl Write, s: &FluidState) -> Result<()> {
    writeln!(w, "state {} {}", s.kind().name(), fmt_f64(s.time))?;
    Dump::cell(&s.rho).write(w)?;
    match &s.velocity {
        Velocity::Collocated(v) => v.components().iter().try_for_each(|c| Dump::cell(c).write(w)),
        Velocity::Staggered(u) => (0..u.mesh().dim()).try_for_each(|i| Dump::staggered(u, i).write(w)),
    }
}

pub fn read_state(r: &mut impl BufRead) -> Result<FluidState> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "state" {
        return Err(Error::Parse(format!("bad state header `{}`", line.trim())));
    }
    let kind: SchemeKind = parts[1].parse()?;
    let time = parse_f64(parts[2], "time")?;
    let rho = Dump::read(r)?.into_cell()?;
    let mesh = *rho.mesh();
    let d = mesh.dim();
    let velocity = match kind {
        SchemeKind::Fv => Velocity::Collocated(CellVectorField::new(
            (0..d).map(|_| Dump::read(r)?.into_cell()).collect::<Result<Vec<_>>>()?,
        )?),
        SchemeKind::Mac => {
            let mut comps = Vec::with_capacity(d);
            for i in 0..d {
                let dump = Dump::read(r)?;
                if dump.kind != DumpKind::Staggered(i) || dump.mesh != mesh {
                    return Err(Error::Parse(format!("expected staggered-{i} on the density mesh")));
                }
                comps.push(dump.values);
            }
            Velocity::Staggered(StaggeredField::new(mesh, comps)?)
        }
    };
    if velocity.mesh() != &mesh {
        return Err(Error::MeshMismatch);
    }
    FluidState::new(rho, velocity, time)
}

/// A row type with a fixed CSV header.
pub trait CsvRecord: Sized {
    const HEADER: &'static [&'static str];
    fn to_fields(&self) -> Vec<String>;
    fn from_fields(row: &Row) -> Result<Self>;
}

/// One parsed CSV row, with typed accessors that name the column on failure.
pub struct Row<'a> {
    header: &'static [&'static str],
    record: &'a csv::StringRecord,
}

impl Row<'_> {
    pub fn str(&self, k: usize) -> Result<&str> {
        self.record.get(k).ok_or_else(|| Error::Parse(format!("missing column `{}`", self.header[k])))
    }

    pub fn f64(&self, k: usize) -> Result<f64> {
        parse_f64(self.str(k)?, self.header[k])
    }

    pub fn usize(&self, k: usize) -> Result<usize> {
        parse_usize(self.str(k)?, self.header[k])
    }

    /// Empty cells read as `None`.
    pub fn opt_f64(&self, k: usize) -> Result<Option<f64>> {
        let s = self.str(k)?;
        if s.is_empty() {
            Ok(None)
        } else {
            parse_f64(s, self.header[k]).map(Some)
        }
    }
}

pub fn write_csv<T: CsvRecord>(w: impl Write, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(T::HEADER)?;
    for r in rows {
        out.write_record(r.to_fields())?;
    }
    out.flush()?;
    Ok(())
}

/// Appends rows one at a time, flushing after each so a failed run leaves every
/// accepted row on disk.
pub struct CsvStream<W: Write, T> {
    out: csv::Writer<W>,
    rows: std::marker::PhantomData<fn(&T)>,
}

impl<W: Write, T: CsvRecord> CsvStream<W, T> {
    pub fn new(w: W) -> Result<Self> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(T::HEADER)?;
        out.flush()?;
        Ok(CsvStream { out, rows: std::marker::PhantomData })
    }

    pub fn push(&mut self, row: &T) -> Result<()> {
        self.out.write_record(row.to_fields())?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_csv<T: CsvRecord>(r: impl std::io::Read) -> Result<Vec<T>> {
    let mut input = csv::Reader::from_reader(r);
    let header = input.headers()?.clone();
    if header.iter().ne(T::HEADER.iter().copied()) {
        return Err(Error::Parse(format!("expected header {:?}, found {:?}", T::HEADER, header)));
    }
    input
        .records()
        .map(|rec| {
            let rec = rec?;
            T::from_fields(&Row { header: T::HEADER, record: &rec })
        })
        .collect()
}

impl CsvRecord for StepReport {
    const HEADER: &'static [&'static str] = &[
        "n",
        "t",
        "iterations",
        "residual",
        "mass",
        "min_rho",
        "E",
        "D",
        "slack",
        "max_rho",
        "max_speed",
        "factorizations",
        "linear_iterations",
    ];

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            fmt_f64(self.t),
            self.iterations.to_string(),
            fmt_f64(self.residual),
            fmt_f64(self.mass),
            fmt_f64(self.min_rho),
            fmt_f64(self.energy),
            fmt_f64(self.dissipation),
            fmt_f64(self.slack),
            fmt_f64(self.max_rho),
            fmt_f64(self.max_speed),
            self.factorizations.to_string(),
            self.linear_iterations.to_string(),
        ]
    }

    fn from_fields(r: &Row) -> Result<Self> {
        Ok(StepReport {
            n: r.usize(0)?,
            t: r.f64(1)?,
            iterations: r.usize(2)?,
            residual: r.f64(3)?,
            mass: r.f64(4)?,
            min_rho: r.f64(5)?,
            energy: r.f64(6)?,
            dissipation: r.f64(7)?,
            slack: r.f64(8)?,
            max_rho: r.f64(9)?,
            max_speed: r.f64(10)?,
            factorizations: r.usize(11)?,
            linear_iterations: r.usize(12)?,
        })
    }
}

impl CsvRecord for EocLevel {
    const HEADER: &'static [&'static str] = &[
        "n",
        "h",
        "dt",
        "steps",
        "relative_energy",
        "gradient",
        "divergence",
        "density",
        "momentum",
        "velocity",
        "max_rho",
        "max_speed",
        "newton_iterations",
    ];

    fn to_fields(&self) -> Vec<String> {
        let mut f = vec![self.n.to_string(), fmt_f64(self.h), fmt_f64(self.dt), self.steps.to_string()];
        f.extend(self.metrics().iter().map(|&m| fmt_f64(m)));
        f.extend([fmt_f64(self.max_rho), fmt_f64(self.max_speed), self.newton_iterations.to_string()]);
        f
    }

    fn from_fields(r: &Row) -> Result<Self> {
        Ok(EocLevel {
            n: r.usize(0)?,
            h: r.f64(1)?,
            dt: r.f64(2)?,
            steps: r.usize(3)?,
            relative_energy: r.f64(4)?,
            gradient: r.f64(5)?,
            divergence: r.f64(6)?,
            density: r.f64(7)?,
            momentum: r.f64(8)?,
            velocity: r.f64(9)?,
            max_rho: r.f64(10)?,
            max_speed: r.f64(11)?,
            newton_iterations: r.usize(12)?,
        })
    }
}

/// Fitted order of one EOC metric; an empty `order` cell means undefined.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderRow {
    pub metric: String,
    pub order: Option<f64>,
}

impl CsvRecord for OrderRow {
    const HEADER: &'static [&'static str] = &["metric", "order"];

    fn to_fields(&self) -> Vec<String> {
        vec![self.metric.clone(), self.order.map(fmt_f64).unwrap_or_default()]
    }

    fn from_fields(r: &Row) -> Result<Self> {
        Ok(OrderRow { metric: r.str(0)?.to_string(), order: r.opt_f64(1)? })
    }
}

pub fn order_rows(t: &EocTable) -> Vec<OrderRow> {
    t.orders.iter().map(|(m, o)| OrderRow { metric: m.to_string(), order: *o }).collect()
}

impl CsvRecord for ConsistencyReport {
    const HEADER: &'static [&'static str] = &["test_function", "tau", "e_rho", "e_m", "h", "dt"];

    fn to_fields(&self) -> Vec<String> {
        let mut f = vec![self.test_function.clone()];
        f.extend([self.tau, self.e_rho, self.e_m, self.h, self.dt].map(fmt_f64));
        f
    }

    fn from_fields(r: &Row) -> Result<Self> {
        Ok(ConsistencyReport {
            test_function: r.str(0)?.to_string(),
            tau: r.f64(1)?,
            e_rho: r.f64(2)?,
            e_m: r.f64(3)?,
            h: r.f64(4)?,
            dt: r.f64(5)?,
        })
    }
}

impl CsvRecord for RatePrediction {
    const HEADER: &'static [&'static str] = &["scheme", "d", "gamma", "epsilon", "beta_d", "beta_m", "rate"];

    fn to_fields(&self) -> Vec<String> {
        let mut f = vec![self.scheme.name().to_string(), self.dim.to_string()];
        f.extend([self.gamma, self.epsilon, self.beta_d, self.beta_m, self.rate].map(fmt_f64));
        f
    }

    fn from_fields(r: &Row) -> Result<Self> {
        Ok(RatePrediction {
            scheme: r.str(0)?.parse()?,
            dim: r.usize(1)?,
            gamma: r.f64(2)?,
            epsilon: r.f64(3)?,
            beta_d: r.f64(4)?,
            beta_m: r.f64(5)?,
            rate: r.f64(6)?,
        })
    }
}

/// `relative` and `passed` are derived columns, written for reading and ignored on parse.
impl CsvRecord for IdentityResidual {
    const HEADER: &'static [&'static str] = &["name", "relation", "lhs", "rhs", "abs_diff", "relative", "passed"];

    fn to_fields(&self) -> Vec<String> {
        let rel = match self.relation {
            Relation::Equal => "eq",
            Relation::AtMost => "le",
        };
        let mut f = vec![self.name.clone(), rel.to_string()];
        f.extend([self.lhs, self.rhs, self.abs_diff, self.relative()].map(fmt_f64));
        f.push(self.passed().to_string());
        f
    }

    fn from_fields(r: &Row) -> Result<Self> {
        let relation = match r.str(1)? {
            "eq" => Relation::Equal,
            "le" => Relation::AtMost,
            s => return Err(Error::Parse(format!("relation: unknown `{s}`"))),
        };
        Ok(IdentityResidual {
            name: r.str(0)?.to_string(),
            relation,
            lhs: r.f64(2)?,
            rhs: r.f64(3)?,
            abs_diff: r.f64(4)?,
        })
    }
}
