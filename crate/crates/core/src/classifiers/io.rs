//! Text model file for a composite classifier.
//!
//! ```text
//! cspace-classifier
//! version 1
//! robot-hash <hex>
//! scene-hash <hex>
//! kind knn|svm
//! k <int>
//! svm-c <f64>
//! svm-gamma <f64>|auto
//! svm-gamma-scale <f64>
//! svm-tol <f64>
//! svm-max-iter <int>
//! raw-dims <int>...
//! assignment <int>...
//! end-header
//! level <i> knn <dim> <k> <count>
//! <F|C> <x_1> ... <x_dim>                       (count lines)
//! level <i> svm <dim> <gamma> <c> <tol> <max-iter> <bias> <iterations> <count>
//! <alpha> <F|C> <train-index> <x_1> ... <x_dim>  (count lines)
//! end
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a reloaded SVM
//! gives bit-identical decision values.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use super::{CoalescingMap, CompositeClassifier, Elementary, ElementaryKind, Hyperparams, KnnModel, Label, SvmModel, SvmParams};
use crate::error::{Error, Result};

const MAGIC: &str = "cspace-classifier";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub robot_hash: String,
    pub scene_hash: String,
    pub kind: ElementaryKind,
    pub hyper: Hyperparams,
    pub classifier: CompositeClassifier,
}

fn fmt_err(reason: impl Into<String>) -> Error {
    Error::format("classifier", reason)
}

fn label_char(l: Label) -> &'static str {
    match l {
        Label::Free => "F",
        Label::Collision => "C",
    }
}

fn parse_label(s: &str) -> Result<Label> {
    match s {
        "F" => Ok(Label::Free),
        "C" => Ok(Label::Collision),
        other => Err(fmt_err(format!("bad label {other:?}"))),
    }
}

fn parse<T: FromStr>(s: Option<&str>, what: &str) -> Result<T> {
    let s = s.ok_or_else(|| fmt_err(format!("missing {what}")))?;
    s.parse().map_err(|_| fmt_err(format!("bad {what} {s:?}")))
}

fn join<T: std::fmt::Debug>(xs: &[T]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

pub fn write_model<W: Write>(file: &ModelFile, mut w: W) -> std::io::Result<()> {
    let map = file.classifier.map();
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "version {VERSION}")?;
    writeln!(w, "robot-hash {}", file.robot_hash)?;
    writeln!(w, "scene-hash {}", file.scene_hash)?;
    writeln!(w, "kind {}", file.kind)?;
    writeln!(w, "k {}", file.hyper.k)?;
    writeln!(w, "svm-c {:?}", file.hyper.svm.c)?;
    match file.hyper.svm.gamma {
        Some(g) => writeln!(w, "svm-gamma {g:?}")?,
        None => writeln!(w, "svm-gamma auto")?,
    }
    writeln!(w, "svm-gamma-scale {:?}", file.hyper.svm.gamma_scale)?;
    writeln!(w, "svm-tol {:?}", file.hyper.svm.tol)?;
    writeln!(w, "svm-max-iter {}", file.hyper.svm.max_iter)?;
    writeln!(w, "raw-dims {}", join(map.raw_dims()))?;
    writeln!(w, "assignment {}", join(map.assignment()))?;
    writeln!(w, "end-header")?;
    for (i, level) in file.classifier.levels().iter().enumerate() {
        match level {
            Elementary::Knn(m) => {
                let (pts, labels) = m.training_set();
                writeln!(w, "level {i} knn {} {} {}", m.dim(), m.k(), labels.len())?;
                for (x, &l) in pts.chunks_exact(m.dim()).zip(labels) {
                    writeln!(w, "{} {}", label_char(l), join(x))?;
                }
            }
            Elementary::Svm(m) => {
                writeln!(
                    w,
                    "level {i} svm {} {:?} {:?} {:?} {} {:?} {} {}",
                    m.dim, m.gamma, m.c, m.tol, m.max_iter, m.bias, m.iterations, m.alpha.len()
                )?;
                for (j, (x, a, l)) in m.support_vectors().enumerate() {
                    writeln!(w, "{a:?} {} {} {}", label_char(l), m.sv_index[j], join(x))?;
                }
            }
        }
    }
    writeln!(w, "end")
}

pub fn read_model<R: BufRead>(r: R) -> Result<ModelFile> {
    let mut lines = r.lines();
    let mut next = move || -> Result<String> {
        match lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(fmt_err(e.to_string())),
            None => Err(fmt_err("unexpected end of file")),
        }
    };
    if next()? != MAGIC {
        return Err(fmt_err("not a classifier file"));
    }
    let field = &mut |key: &str| -> Result<String> {
        let line = next()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ => Err(fmt_err(format!("expected {key}, found {line:?}"))),
        }
    };
    let version: u32 = parse(Some(&field("version")?), "version")?;
    if version != VERSION {
        return Err(fmt_err(format!("unsupported version {version}")));
    }
    let robot_hash = field("robot-hash")?;
    let scene_hash = field("scene-hash")?;
    let kind: ElementaryKind = field("kind")?.parse()?;
    let k = parse(Some(&field("k")?), "k")?;
    let c = parse(Some(&field("svm-c")?), "svm-c")?;
    let gamma = match field("svm-gamma")?.as_str() {
        "auto" => None,
        g => Some(parse(Some(g), "svm-gamma")?),
    };
    let gamma_scale = parse(Some(&field("svm-gamma-scale")?), "svm-gamma-scale")?;
    let tol = parse(Some(&field("svm-tol")?), "svm-tol")?;
    let max_iter = parse(Some(&field("svm-max-iter")?), "svm-max-iter")?;
    let ints = |s: String, what: &str| -> Result<Vec<usize>> { s.split_whitespace().map(|t| parse(Some(t), what)).collect() };
    let raw_dims = ints(field("raw-dims")?, "raw-dims")?;
    let assignment = ints(field("assignment")?, "assignment")?;
    let map = CoalescingMap::from_assignment(&raw_dims, assignment)?;
    if next()? != "end-header" {
        return Err(fmt_err("missing end-header"));
    }
    let hyper = Hyperparams {
        k,
        svm: SvmParams {
            c,
            gamma,
            gamma_scale,
            tol,
            max_iter,
            ..SvmParams::default()
        },
    };

    let mut levels = Vec::with_capacity(map.levels());
    for i in 0..map.levels() {
        let head = next()?;
        let mut t = head.split_whitespace();
        if t.next() != Some("level") || parse::<usize>(t.next(), "level index")? != i {
            return Err(fmt_err(format!("expected level {i}, found {head:?}")));
        }
        let level_kind: ElementaryKind = parse(t.next(), "level kind")?;
        if level_kind != kind {
            return Err(fmt_err(format!("level {i} is {level_kind}, header says {kind}")));
        }
        let dim: usize = parse(t.next(), "dim")?;
        let level = match kind {
            ElementaryKind::Knn => {
                let k: usize = parse(t.next(), "k")?;
                let count: usize = parse(t.next(), "count")?;
                let mut pts = Vec::with_capacity(count * dim);
                let mut labels = Vec::with_capacity(count);
                for _ in 0..count {
                    let line = next()?;
                    let mut t = line.split_whitespace();
                    labels.push(parse_label(t.next().unwrap_or(""))?);
                    for _ in 0..dim {
                        pts.push(parse(t.next(), "coordinate")?);
                    }
                }
                Elementary::Knn(KnnModel::train(&pts, dim, &labels, k)?)
            }
            ElementaryKind::Svm => {
                let gamma = parse(t.next(), "gamma")?;
                let c = parse(t.next(), "c")?;
                let tol = parse(t.next(), "tol")?;
                let max_iter = parse(t.next(), "max-iter")?;
                let bias = parse(t.next(), "bias")?;
                let iterations = parse(t.next(), "iterations")?;
                let count: usize = parse(t.next(), "count")?;
                let mut m = SvmModel {
                    dim,
                    gamma,
                    c,
                    tol,
                    max_iter,
                    bias,
                    support: Vec::with_capacity(count * dim),
                    alpha: Vec::with_capacity(count),
                    labels: Vec::with_capacity(count),
                    sv_index: Vec::with_capacity(count),
                    iterations,
                };
                for _ in 0..count {
                    let line = next()?;
                    let mut t = line.split_whitespace();
                    m.alpha.push(parse(t.next(), "alpha")?);
                    m.labels.push(parse_label(t.next().unwrap_or(""))?);
                    m.sv_index.push(parse(t.next(), "train index")?);
                    for _ in 0..dim {
                        m.support.push(parse(t.next(), "coordinate")?);
                    }
                }
                Elementary::Svm(m)
            }
        };
        levels.push(level);
    }
    if next()? != "end" {
        return Err(fmt_err("trailing data after last level"));
    }
    Ok(ModelFile {
        robot_hash,
        scene_hash,
        kind,
        hyper,
        classifier: CompositeClassifier::new(map, levels)?,
    })
}

impl ModelFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        write_model(self, &mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        read_model(BufReader::new(f))
    }

    pub fn to_string_lossless(&self) -> String {
        let mut buf = Vec::new();
        write_model(self, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}
