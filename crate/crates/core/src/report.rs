//! Report rows, the per-command tables shared by the CLI and sweeps, and
//! sweep execution.
//!
//! A sweep is a JSON document
//!
//! ```json
//! {"space": {"d": 1},
//!  "cells": [{"command": "hypertrace", "gens": [["1","0"]], "ops": ["W[1,0]"], "grid": [2, 4, 8]}]}
//! ```
//!
//! Cells run in order; the grid points of a cell run in parallel and are
//! reassembled in grid order, so the output does not depend on scheduling.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::amenability::FolnerSubspace;
use crate::character::{character_relation_check, Character};
use crate::cp::{self, ElementFamily};
use crate::error::{Error, Result};
use crate::expr::{parse_element, ElementExpr};
use crate::fock::{FockRep, Relation, RelationParams};
use crate::lattice::{box_translate_defect, hypertrace_commutator, BoxShape, LatticeModel};
use crate::par;
use crate::rational::{self, Rational};
use crate::symplectic::{SymplecticSpace, VecX};
use crate::weyl::WeylElement;

pub const CLOSED_FORM: &str = "closed-form";
pub const ORACLE: &str = "oracle";

/// Tolerance for log-log slope estimates against their predictions.
pub const SLOPE_TOL: f64 = 0.05;
pub const DEFECT_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-12;
pub const HYPERTRACE_TOL: f64 = 1e-12;
pub const EXACT_RELATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub metric: String,
    pub value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl ReportRow {
    fn new(command: &str, parameters: &BTreeMap<String, Value>, metric: &str, value: Value) -> Self {
        ReportRow {
            command: command.to_string(),
            parameters: parameters.clone(),
            metric: metric.to_string(),
            value,
            predicted: None,
            provenance: None,
            pass: true,
            tolerance: None,
        }
    }

    fn predicted(mut self, predicted: Value, provenance: &str) -> Self {
        self.predicted = Some(predicted);
        self.provenance = Some(provenance.to_string());
        self
    }

    fn check(mut self, pass: bool, tolerance: Option<f64>) -> Self {
        self.pass = pass;
        self.tolerance = tolerance;
        self
    }

    /// Compares a numeric value with a numeric prediction.
    fn against(self, value: f64, predicted: Option<f64>, provenance: &str, tol: f64) -> Self {
        match predicted {
            Some(p) => {
                let pass = (value - p).abs() <= tol;
                self.predicted(json!(p), provenance).check(pass, Some(tol))
            }
            None => self,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Report {
    pub fn from_rows(rows: Vec<ReportRow>) -> Self {
        let pass = rows.iter().all(|r| r.pass);
        Report { rows, pass, error: None }
    }

    /// 0 when every row passes, 1 otherwise (including aborted sweeps).
    pub fn exit_code(&self) -> i32 {
        if self.pass && self.error.is_none() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        rows_to_csv(&self.rows)
    }
}

/// Flat CSV view: one line per row, structured cells as compact JSON.
pub fn rows_to_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Sweep(format!("csv: {e}"));
    w.write_record(["command", "parameters", "metric", "value", "predicted", "provenance", "pass", "tolerance"])
        .map_err(io)?;
    for r in rows {
        let cell = |v: &Value| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        w.write_record([
            r.command.clone(),
            serde_json::to_string(&r.parameters)?,
            r.metric.clone(),
            cell(&r.value),
            r.predicted.as_ref().map(cell).unwrap_or_default(),
            r.provenance.clone().unwrap_or_default(),
            r.pass.to_string(),
            r.tolerance.map(|t| t.to_string()).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Sweep(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Sweep(format!("csv: {e}")))
}

/// CSV view of a JSON table: an array of objects (or an object holding a
/// `rows` array, or a single object). Columns follow first appearance
/// (keys within an object are sorted);
/// nested values are written as compact JSON.
pub fn json_to_csv(value: &Value) -> Result<String> {
    let rows: Vec<&Value> = match value {
        Value::Array(items) => items.iter().collect(),
        Value::Object(map) => match map.get("rows") {
            Some(Value::Array(items)) => items.iter().collect(),
            _ => vec![value],
        },
        other => vec![other],
    };
    let mut columns: Vec<String> = Vec::new();
    for row in &rows {
        if let Value::Object(map) = row {
            for key in map.keys() {
                if !columns.contains(key) {
                    columns.push(key.clone());
                }
            }
        }
    }
    let io = |e: csv::Error| Error::Sweep(format!("csv: {e}"));
    let cell = |v: Option<&Value>| match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    if columns.is_empty() {
        w.write_record(["value"]).map_err(io)?;
        for row in &rows {
            w.write_record([cell(Some(row))]).map_err(io)?;
        }
    } else {
        w.write_record(&columns).map_err(io)?;
        for row in &rows {
            w.write_record(columns.iter().map(|c| cell(row.get(c)))).map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Sweep(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Sweep(format!("csv: {e}")))
}

/// Parses each source string, keeping the trimmed source as its label.
pub fn parse_ops(ops: &[String], space: &SymplecticSpace) -> Result<Vec<(String, ElementExpr)>> {
    ops.iter().map(|src| Ok((src.trim().to_string(), parse_element(src, space)?))).collect()
}

fn weyl_ops(ops: &[(String, ElementExpr)], space: &Arc<SymplecticSpace>) -> Result<Vec<(String, WeylElement)>> {
    ops.iter().map(|(l, e)| Ok((l.clone(), e.to_weyl(space)?))).collect()
}

fn c_pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&rational::format_rational(r))
}

fn ser_opt_rational<S: serde::Serializer>(r: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_some(&rational::format_rational(r)),
        None => s.serialize_none(),
    }
}

/// `folner-ratio` table row. For monomials all three entries are the exact
/// ratio `|S ∪ (g + S)| / |S|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FolnerRow {
    pub op: String,
    #[serde(serialize_with = "ser_rational")]
    pub lower: Rational,
    pub numeric: f64,
    #[serde(serialize_with = "ser_rational")]
    pub upper: Rational,
    /// `1 + 1/N` when the op is a multiple of `W(±g_i)`.
    #[serde(serialize_with = "ser_opt_rational", skip_serializing_if = "Option::is_none")]
    pub predicted: Option<Rational>,
    pub pass: bool,
}

pub fn folner_ratio_rows(
    space: &Arc<SymplecticSpace>,
    gens: &[VecX],
    n: u64,
    ops: &[(String, ElementExpr)],
) -> Result<Vec<FolnerRow>> {
    let sub = FolnerSubspace::build(gens, n)?;
    let mut rows = Vec::with_capacity(ops.len());
    for (label, a) in weyl_ops(ops, space)? {
        let row = match a.as_monomial() {
            Some((g, _)) => {
                let exact = sub.ratio_monomial(g)?;
                let is_gen = gens.iter().any(|h| h == g || &(-h) == g);
                let predicted = is_gen.then(|| Rational::one() + Rational::new(1.into(), n.into()));
                let pass = predicted.as_ref().is_none_or(|p| *p == exact);
                FolnerRow {
                    op: label,
                    numeric: rational::to_f64(&exact),
                    lower: exact.clone(),
                    upper: exact,
                    predicted,
                    pass,
                }
            }
            None => {
                let r = sub.ratio_general(&a)?;
                let pass =
                    r.numeric >= rational::to_f64(&r.lower) - 1e-12 && r.numeric <= rational::to_f64(&r.upper) + 1e-12;
                FolnerRow { op: label, lower: r.lower, numeric: r.numeric, upper: r.upper, predicted: None, pass }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// `compress` table row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressRow {
    pub op: String,
    pub k: usize,
    /// `‖φ(A*A) − φ(A*)φ(A)‖_{2,tr}`.
    pub defect: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub defect_predicted: Option<f64>,
    pub compressed_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm_predicted: Option<f64>,
    pub l1_bound: f64,
    /// `tr∘φ(A)` as `[re, im]`.
    pub trace: [f64; 2],
    /// `τ(A)` as `[re, im]`.
    pub tau: [f64; 2],
    pub pass: bool,
}

/// Closed-form compressed norm when known: `|c|` for monomials, and
/// `2cos(π/(L+1))` for `W(g) + W(−g)` on a one-generator box of side `L`.
pub fn predicted_norm(model: &LatticeModel, a: &WeylElement) -> Option<f64> {
    if let Some((_, c)) = a.as_monomial() {
        return Some(c.norm());
    }
    let gens = model.gens();
    if gens.len() != 1 || a.len() != 2 {
        return None;
    }
    let g = &gens[0];
    let minus = -g;
    let one = Complex64::new(1.0, 0.0);
    if a.coeff(g) == one && a.coeff(&minus) == one {
        let side = model.shape().side(model.radius()) as f64;
        return Some(2.0 * (std::f64::consts::PI / (side + 1.0)).cos());
    }
    None
}

/// Closed form of `defect(A*, A)` for a monomial `A = cW(g)`:
/// `|c|²·sqrt(|B Δ (B − g)| / (2|B|))`.
pub fn predicted_defect(model: &LatticeModel, a: &WeylElement) -> Result<Option<f64>> {
    match a.as_monomial() {
        Some((g, c)) => {
            let k = model.coords_of(g)?;
            let frac = box_translate_defect(model.shape(), model.radius(), &k) / 2.0;
            Ok(Some(c.norm_sqr() * frac.sqrt()))
        }
        None => Ok(None),
    }
}

pub fn compress_rows(model: &LatticeModel, ops: &[(String, ElementExpr)]) -> Result<Vec<CompressRow>> {
    let space = model.space().clone();
    let mut rows = Vec::with_capacity(ops.len());
    for (label, a) in weyl_ops(ops, &space)? {
        let defect = model.mult_defect(&a.adjoint(), &a)?;
        let norms = model.norm_report(&a)?;
        let trace = model.trace_reproduction(&a)?;
        let tau = a.trace();
        let defect_predicted = predicted_defect(model, &a)?;
        let norm_predicted = predicted_norm(model, &a);
        let pass = defect_predicted.is_none_or(|p| (defect - p).abs() <= DEFECT_TOL)
            && norm_predicted.is_none_or(|p| (norms.compressed_norm - p).abs() <= NORM_TOL)
            && (trace - tau).norm() <= TRACE_TOL
            && norms.compressed_norm <= norms.l1_bound + NORM_TOL;
        rows.push(CompressRow {
            op: label,
            k: model.size(),
            defect,
            defect_predicted,
            compressed_norm: norms.compressed_norm,
            norm_predicted,
            l1_bound: norms.l1_bound,
            trace: c_pair(trace),
            tau: c_pair(tau),
            pass,
        });
    }
    Ok(rows)
}

/// `hypertrace` table row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypertraceRow {
    pub op: String,
    pub ambient_radius: u64,
    pub trace_norm: f64,
    pub combinatorial_prediction: Option<f64>,
    pub pass: bool,
}

pub fn hypertrace_rows(
    space: &Arc<SymplecticSpace>,
    gens: &[VecX],
    shape: BoxShape,
    n: u64,
    ambient: Option<u64>,
    ops: &[(String, ElementExpr)],
) -> Result<Vec<HypertraceRow>> {
    let mut rows = Vec::with_capacity(ops.len());
    for (label, a) in weyl_ops(ops, space)? {
        let h = hypertrace_commutator(space, gens, shape, n, ambient, &a)?;
        let pass = h.combinatorial_prediction.is_none_or(|p| (h.trace_norm - p).abs() <= HYPERTRACE_TOL);
        rows.push(HypertraceRow {
            op: label,
            ambient_radius: h.ambient_radius,
            trace_norm: h.trace_norm,
            combinatorial_prediction: h.combinatorial_prediction,
            pass,
        });
    }
    Ok(rows)
}

/// Family for c.c.p. commands: every op, consecutive ops as pairs, and the
/// adjoint closure of each op.
pub fn element_family(space: &Arc<SymplecticSpace>, ops: &[(String, ElementExpr)]) -> Result<ElementFamily> {
    let elements = weyl_ops(ops, space)?;
    let mut family = ElementFamily::new();
    for (label, a) in &elements {
        family = family.element(label.clone(), a.clone());
    }
    for pair in elements.chunks(2) {
        if let [(a, _), (b, _)] = pair {
            family = family.pair(a, b)?;
        }
    }
    for (label, _) in &elements {
        family = family.adjoint_closure(label)?;
    }
    Ok(family)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub space: Option<SymplecticSpace>,
    #[serde(default)]
    pub cells: Vec<SweepCell>,
}

/// One sweep cell. Which fields are read depends on `command`:
///
/// * `folner-ratio`, `compress`, `hypertrace`, `cp-ensemble`: `gens`, `ops`,
///   `grid` (box radii `N`), `box`; `compress` takes `metric`
///   (`defect` / `norm` / `trace`, default all), `hypertrace` takes
///   `ambient`, `cp-ensemble` takes `seed` and `samples`.
/// * `resolvent`: `grid` (levels `M`), `modes`, `cutoff`, `relation`, `params`.
/// * `ccr`: `grid` (levels `M`), `cutoff` (default `M − 1`).
/// * `character`: `mu`, `params`, `ops` (resolvent words).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCell {
    pub command: String,
    #[serde(default)]
    pub gens: Vec<VecX>,
    #[serde(default)]
    pub ops: Vec<String>,
    #[serde(default)]
    pub grid: Vec<u64>,
    #[serde(default, rename = "box")]
    pub shape: BoxShape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<RelationParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<VecX>,
}

impl SweepSpec {
    pub fn from_json(src: &str) -> Result<Self> {
        Ok(serde_json::from_str(src)?)
    }
}

/// Runs every cell; on the first failing cell the rows gathered so far are
/// returned with the error recorded.
pub fn run_sweep(spec: &SweepSpec, default_seed: Option<u64>) -> Report {
    let space = Arc::new(spec.space.clone().unwrap_or_else(|| SymplecticSpace::standard(1).expect("d = 1")));
    let mut rows = Vec::new();
    for (i, cell) in spec.cells.iter().enumerate() {
        match run_cell(&space, cell, default_seed) {
            Ok(cell_rows) => rows.extend(cell_rows),
            Err((partial, err)) => {
                rows.extend(partial);
                let mut report = Report::from_rows(rows);
                report.pass = false;
                report.error = Some(format!("cell {i} ({}): {err}", cell.command));
                return report;
            }
        }
    }
    Report::from_rows(rows)
}

type CellResult = std::result::Result<Vec<ReportRow>, (Vec<ReportRow>, Error)>;

/// Runs the grid in parallel and keeps rows up to the first failing point.
fn run_grid<F>(grid: &[u64], f: F) -> std::result::Result<Vec<Vec<ReportRow>>, (Vec<ReportRow>, Error)>
where
    F: Fn(u64) -> Result<Vec<ReportRow>> + Sync + Send,
{
    let results = par::map(grid, |&x| f(x));
    let mut done = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(rows) => done.push(rows),
            Err(e) => return Err((done.into_iter().flatten().collect(), e)),
        }
    }
    Ok(done)
}

fn run_cell(space: &Arc<SymplecticSpace>, cell: &SweepCell, default_seed: Option<u64>) -> CellResult {
    let fail = |e: Error| (Vec::new(), e);
    let ops = match cell.command.as_str() {
        "character" | "resolvent" | "ccr" => Vec::new(),
        _ => parse_ops(&cell.ops, space).map_err(fail)?,
    };
    let gens = cell.gens.clone();
    let shape = cell.shape;
    let mut base = BTreeMap::new();
    if !gens.is_empty() {
        base.insert("gens".to_string(), serde_json::to_value(&gens).map_err(|e| fail(e.into()))?);
    }
    let command = cell.command.as_str();
    match command {
        "folner-ratio" => {
            let per_n = run_grid(&cell.grid, |n| {
                let mut rows = Vec::new();
                for r in folner_ratio_rows(space, &gens, n, &ops)? {
                    let mut params = base.clone();
                    params.insert("N".into(), json!(n));
                    params.insert("op".into(), json!(r.op));
                    let value = if r.lower == r.upper {
                        json!(rational::format_rational(&r.lower))
                    } else {
                        json!({
                            "lower": rational::format_rational(&r.lower),
                            "numeric": r.numeric,
                            "upper": rational::format_rational(&r.upper),
                        })
                    };
                    let mut row = ReportRow::new(command, &params, "ratio", value).check(r.pass, None);
                    if let Some(p) = &r.predicted {
                        row = row.predicted(json!(rational::format_rational(p)), CLOSED_FORM);
                        row.tolerance = Some(0.0);
                    }
                    rows.push(row);
                }
                Ok(rows)
            })?;
            Ok(per_n.into_iter().flatten().collect())
        }
        "compress" => {
            let metrics: Vec<&str> = match cell.metric.as_deref() {
                None => vec!["defect", "compressed_norm", "trace_error"],
                Some("defect") => vec!["defect"],
                Some("norm") => vec!["compressed_norm"],
                Some("trace") => vec!["trace_error"],
                Some(other) => return Err(fail(Error::Sweep(format!("unknown compress metric {other:?}")))),
            };
            let per_n = run_grid(&cell.grid, |n| {
                let model = LatticeModel::new(space, gens.clone(), shape, n)?;
                let mut rows = Vec::new();
                for r in compress_rows(&model, &ops)? {
                    let mut params = base.clone();
                    params.insert("N".into(), json!(n));
                    params.insert("box".into(), json!(shape.to_string()));
                    params.insert("op".into(), json!(r.op));
                    for m in &metrics {
                        let row = match *m {
                            "defect" => ReportRow::new(command, &params, m, json!(r.defect)).against(
                                r.defect,
                                r.defect_predicted,
                                CLOSED_FORM,
                                DEFECT_TOL,
                            ),
                            "compressed_norm" => {
                                let row = ReportRow::new(command, &params, m, json!(r.compressed_norm));
                                match r.norm_predicted {
                                    Some(_) => row.against(r.compressed_norm, r.norm_predicted, CLOSED_FORM, NORM_TOL),
                                    None => row.check(r.compressed_norm <= r.l1_bound + NORM_TOL, None),
                                }
                            }
                            _ => {
                                let err = Complex64::new(r.trace[0] - r.tau[0], r.trace[1] - r.tau[1]).norm();
                                ReportRow::new(command, &params, m, json!(err)).against(
                                    err,
                                    Some(0.0),
                                    CLOSED_FORM,
                                    TRACE_TOL,
                                )
                            }
                        };
                        rows.push(row);
                    }
                }
                Ok(rows)
            })?;
            let mut rows: Vec<ReportRow> = per_n.into_iter().flatten().collect();
            if metrics.contains(&"defect") {
                rows.extend(slope_rows(command, &base, &rows, "defect", shape));
            }
            Ok(rows)
        }
        "hypertrace" => {
            let per_n = run_grid(&cell.grid, |n| {
                let mut rows = Vec::new();
                for r in hypertrace_rows(space, &gens, shape, n, cell.ambient, &ops)? {
                    let mut params = base.clone();
                    params.insert("N".into(), json!(n));
                    params.insert("box".into(), json!(shape.to_string()));
                    params.insert("op".into(), json!(r.op));
                    params.insert("ambient".into(), json!(r.ambient_radius));
                    let row = ReportRow::new(command, &params, "trace_norm", json!(r.trace_norm)).against(
                        r.trace_norm,
                        r.combinatorial_prediction,
                        CLOSED_FORM,
                        HYPERTRACE_TOL,
                    );
                    rows.push(row);
                }
                Ok(rows)
            })?;
            let mut rows: Vec<ReportRow> = per_n.into_iter().flatten().collect();
            rows.extend(slope_rows(command, &base, &rows, "trace_norm", shape));
            Ok(rows)
        }
        "cp-ensemble" => {
            let seed =
                cell.seed.or(default_seed).ok_or_else(|| fail(Error::Sweep("cp-ensemble needs a seed".into())))?;
            let samples = cell.samples.unwrap_or(50);
            let family = element_family(space, &ops).map_err(fail)?;
            let seeds: Vec<u64> = (0..samples as u64).map(|i| seed.wrapping_add(i)).collect();
            let mut rows = Vec::new();
            for &n in &cell.grid {
                let model = LatticeModel::new(space, gens.clone(), shape, n).map_err(|e| (rows.clone(), e))?;
                let records = cp::ensemble(&model, &family, &seeds).map_err(|e| (rows.clone(), e))?;
                let mut params = base.clone();
                params.insert("N".into(), json!(n));
                params.insert("box".into(), json!(shape.to_string()));
                params.insert("seed".into(), json!(seed));
                params.insert("samples".into(), json!(samples));
                rows.extend(ensemble_rows(command, &params, &records));
            }
            Ok(rows)
        }
        "resolvent" => {
            let relation: Relation = cell
                .relation
                .as_deref()
                .ok_or_else(|| fail(Error::Sweep("resolvent cell needs a relation".into())))?
                .parse()
                .map_err(fail)?;
            let params = cell.params.clone().unwrap_or_default();
            let modes = cell.modes.unwrap_or(1);
            let cutoff = cell.cutoff.unwrap_or(4);
            let mut base = base.clone();
            base.insert("relation".into(), json!(relation.id()));
            base.insert("modes".into(), json!(modes));
            base.insert("cutoff".into(), json!(cutoff));
            base.insert("params".into(), serde_json::to_value(&params).map_err(|e| fail(e.into()))?);
            let per_m = run_grid(&cell.grid, |m| {
                let rep = FockRep::new(modes, m as usize)?;
                let res = rep.relation_residual(relation, &params, cutoff)?;
                let mut p = base.clone();
                p.insert("M".into(), json!(m));
                let raw = ReportRow::new(command, &p, "raw", json!(res.raw));
                let raw = if relation.is_exact() {
                    raw.check(res.raw <= EXACT_RELATION_TOL, Some(EXACT_RELATION_TOL))
                } else {
                    raw
                };
                Ok(vec![raw, ReportRow::new(command, &p, "compressed", json!(res.compressed))])
            })?;
            let mut rows: Vec<ReportRow> = per_m.into_iter().flatten().collect();
            if !relation.is_exact() && cell.grid.len() >= 2 {
                let values: Vec<f64> =
                    rows.iter().filter(|r| r.metric == "compressed").filter_map(|r| r.value.as_f64()).collect();
                let decreasing = values.windows(2).all(|w| w[1] < w[0]);
                let ratio = values[values.len() - 1] / values[0];
                let mut p = base.clone();
                p.insert("grid".into(), json!(cell.grid));
                rows.push(
                    ReportRow::new(command, &p, "compressed_last_over_first", json!(ratio))
                        .check(decreasing && ratio <= 0.5, Some(0.5)),
                );
            }
            Ok(rows)
        }
        "ccr" => {
            let per_m = run_grid(&cell.grid, |m| {
                let m = m as usize;
                let cutoff = cell.cutoff.unwrap_or(m.saturating_sub(1));
                let value = FockRep::new(1, m)?.ccr_check(cutoff)?;
                let predicted = if cutoff < m { 0.0 } else { m as f64 };
                let mut p = base.clone();
                p.insert("M".into(), json!(m));
                p.insert("cutoff".into(), json!(cutoff));
                Ok(vec![ReportRow::new(command, &p, "ccr_defect", json!(value)).against(
                    value,
                    Some(predicted),
                    CLOSED_FORM,
                    EXACT_RELATION_TOL,
                )])
            })?;
            Ok(per_m.into_iter().flatten().collect())
        }
        "character" => character_rows(space, cell).map_err(fail),
        other => Err(fail(Error::Sweep(format!("unknown sweep command {other:?}")))),
    }
}

fn ensemble_rows(command: &str, params: &BTreeMap<String, Value>, records: &[cp::EnsembleRecord]) -> Vec<ReportRow> {
    let n = records.len().max(1) as f64;
    let frac = |pred: &dyn Fn(&cp::EnsembleRecord) -> bool| records.iter().filter(|r| pred(r)).count() as f64 / n;
    let within = frac(&|r| r.within_bound());
    let inflation = frac(&|r| r.inflation_ok());
    let mid = frac(&|r| r.mid_fraction <= r.mid_fraction_bound + 1e-12);
    let small: Vec<f64> = records.iter().filter(|r| r.delta < 1e-4).map(|r| r.distance).collect();
    let max_small = small.iter().copied().fold(0.0, f64::max);
    let max_unit = records.iter().map(|r| r.unit_deviation).fold(0.0, f64::max);
    vec![
        ReportRow::new(command, params, "within_certified_bound_fraction", json!(within))
            .check(within == 1.0, Some(0.0)),
        ReportRow::new(command, params, "mid_fraction_within_bound_fraction", json!(mid)).check(mid == 1.0, Some(0.0)),
        ReportRow::new(command, params, "small_delta_count", json!(small.len())),
        ReportRow::new(command, params, "small_delta_max_distance", json!(max_small))
            .check(max_small < 1e-2, Some(1e-2)),
        ReportRow::new(command, params, "unit_deviation_max", json!(max_unit)).check(max_unit <= 1e-10, Some(1e-10)),
        ReportRow::new(command, params, "inflation_within_bound_fraction", json!(inflation))
            .check(inflation == 1.0, Some(0.0)),
    ]
}

fn character_rows(space: &Arc<SymplecticSpace>, cell: &SweepCell) -> Result<Vec<ReportRow>> {
    let command = "character";
    let mu = cell.mu.clone().ok_or_else(|| Error::Sweep("character cell needs mu".into()))?;
    space.check(&mu)?;
    let chi = Character::new(mu.clone());
    let params = cell.params.clone().unwrap_or_default();
    let need = |name: &str| Error::MissingParam { relation: command.into(), name: name.into() };
    let lambda = params.lambda.ok_or_else(|| need("lambda"))?;
    let nu = params.nu.ok_or_else(|| need("nu"))?;
    let f = params.f.clone().ok_or_else(|| need("f"))?;
    let g = params.g.clone().ok_or_else(|| need("g"))?;
    let report = character_relation_check(&chi, lambda, nu, &f, &g)?;

    let mut base = BTreeMap::new();
    base.insert("mu".to_string(), serde_json::to_value(&mu)?);
    base.insert("params".to_string(), serde_json::to_value(&params)?);
    let mut rows = Vec::new();
    for r in &report.relations {
        let mut p = base.clone();
        p.insert("relation".into(), json!(r.relation));
        rows.push(ReportRow::new(command, &p, "scalar_residual", json!(r.residual)).against(
            r.residual,
            Some(0.0),
            CLOSED_FORM,
            crate::character::SCALAR_TOL,
        ));
    }
    rows.push(ReportRow::new(command, &base, "sigma_term", json!(report.sigma_term)));
    rows.push(
        ReportRow::new(command, &base, "k1_mult_defect", json!(report.k1_mult_defect))
            .predicted(json!(0.0), CLOSED_FORM)
            .check(report.k1_mult_defect == 0.0, Some(0.0)),
    );
    rows.push(
        ReportRow::new(command, &base, "k1_trace_error", json!(report.k1_trace_error))
            .predicted(json!(0.0), CLOSED_FORM)
            .check(report.k1_trace_error <= crate::character::SCALAR_TOL, Some(crate::character::SCALAR_TOL)),
    );
    for src in &cell.ops {
        let e = parse_element(src, space)?;
        let mut p = base.clone();
        p.insert("op".into(), json!(src.trim()));
        let value = e.character_value(&chi)?;
        rows.push(ReportRow::new(command, &p, "value", serde_json::to_value(&value)?));
        if let Some(word) = e.as_word() {
            let d = chi.mult_domain_distance(&word)?;
            rows.push(
                ReportRow::new(command, &p, "mult_domain_distance", json!(rational::format_rational(&d)))
                    .predicted(json!("0"), CLOSED_FORM)
                    .check(d.is_zero(), Some(0.0)),
            );
        }
    }
    Ok(rows)
}

/// Log-log slope rows for a decay metric, per op, against the box side
/// length (`2N + 1` symmetric, `N` one-sided). The predicted slope is the
/// slope of the closed-form predictions over the same grid; the slope
/// against `N` itself is added for information.
fn slope_rows(
    command: &str,
    base: &BTreeMap<String, Value>,
    rows: &[ReportRow],
    metric: &str,
    shape: BoxShape,
) -> Vec<ReportRow> {
    let mut by_op: BTreeMap<String, Vec<&ReportRow>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        let op = r.parameters.get("op").and_then(Value::as_str).unwrap_or_default().to_string();
        if !by_op.contains_key(&op) {
            order.push(op.clone());
        }
        by_op.entry(op).or_default().push(r);
    }
    let mut out = Vec::new();
    for op in order {
        let series = &by_op[&op];
        let ns: Vec<u64> = series.iter().filter_map(|r| r.parameters.get("N").and_then(Value::as_u64)).collect();
        let values: Vec<f64> = series.iter().filter_map(|r| r.value.as_f64()).collect();
        if ns.len() < 2 || ns.len() != values.len() {
            continue;
        }
        let side: Vec<f64> = ns.iter().map(|&n| shape.side(n) as f64).collect();
        let Some(slope) = loglog_slope(&side.iter().copied().zip(values.iter().copied()).collect::<Vec<_>>()) else {
            continue;
        };
        let predictions: Option<Vec<f64>> =
            series.iter().map(|r| r.predicted.as_ref().and_then(Value::as_f64)).collect();
        let predicted_slope = predictions.and_then(|p| loglog_slope(&side.iter().copied().zip(p).collect::<Vec<_>>()));
        let mut params = base.clone();
        params.insert("op".into(), json!(op));
        params.insert("box".into(), json!(shape.to_string()));
        params.insert("grid".into(), json!(ns));
        let row = ReportRow::new(command, &params, &format!("{metric}_loglog_slope"), json!(slope));
        let row = match predicted_slope {
            Some(p) => row.against(slope, Some(p), CLOSED_FORM, SLOPE_TOL),
            None => row.check(slope < 0.0, None),
        };
        out.push(row);
        let ns_f: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        if let Some(s) = loglog_slope(&ns_f.into_iter().zip(values.iter().copied()).collect::<Vec<_>>()) {
            out.push(ReportRow::new(command, &params, &format!("{metric}_loglog_slope_vs_N"), json!(s)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(src: &str) -> SweepSpec {
        SweepSpec::from_json(src).unwrap()
    }

    fn values(report: &Report, metric: &str) -> Vec<f64> {
        report.rows.iter().filter(|r| r.metric == metric).map(|r| r.value.as_f64().unwrap()).collect()
    }

    #[test]
    fn hypertrace_sweep_example() {
        let report = run_sweep(
            &spec(r#"{"cells": [{"command": "hypertrace", "gens": [[1, 0]], "ops": ["W[1,0]"], "grid": [2, 4, 8]}]}"#),
            None,
        );
        assert!(report.pass, "{report:#?}");
        let v = values(&report, "trace_norm");
        for (got, n) in v.iter().zip([2.0, 4.0, 8.0]) {
            assert!((got - 2.0 / (2.0 * n + 1.0)).abs() < 1e-12);
        }
        let slope = values(&report, "trace_norm_loglog_slope")[0];
        assert!((slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn defect_sweep_example() {
        let report = run_sweep(
            &spec(
                r#"{"cells": [{"command": "compress", "metric": "defect", "gens": [[1, 0]], "ops": ["W[1,0]"], "grid": [4, 12]}]}"#,
            ),
            None,
        );
        assert!(report.pass);
        let v = values(&report, "defect");
        assert!((v[0] - 1.0 / 3.0).abs() < 1e-12 && (v[1] - 0.2).abs() < 1e-12);
        assert!((values(&report, "defect_loglog_slope")[0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_grid_and_empty_sweep() {
        let report =
            run_sweep(&spec(r#"{"cells": [{"command": "hypertrace", "gens": [[1, 0]], "ops": ["W[1,0]"]}]}"#), None);
        assert!(report.rows.is_empty());
        assert_eq!(report.exit_code(), 0);
        assert_eq!(run_sweep(&SweepSpec::default(), None).exit_code(), 0);
    }

    #[test]
    fn failing_cell_keeps_partial_report() {
        let report = run_sweep(
            &spec(
                r#"{"cells": [
                {"command": "ccr", "grid": [8]},
                {"command": "compress", "gens": [[1, 0]], "ops": ["W[0,1]"], "grid": [2]}]}"#,
            ),
            None,
        );
        assert_eq!(report.rows.len(), 1);
        assert!(report.error.as_deref().unwrap().contains("not in lattice"));
        assert_eq!(report.exit_code(), 1);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(SweepSpec::from_json(r#"{"cells": [{"command": "ccr", "grdi": [2]}]}"#).is_err());
    }

    #[test]
    fn rows_round_trip_through_json() {
        let report = run_sweep(
            &spec(
                r#"{"cells": [
                {"command": "folner-ratio", "gens": [[1, 0]], "ops": ["W[1,0]", "W[1,0]+W[0,1]"], "grid": [5]},
                {"command": "character", "mu": [1, 2], "params": {"lambda": 1, "nu": 2, "f": [1, 0], "g": [0, 1]},
                 "ops": ["R(1; 1,0)*R(2; 0,1)"]},
                {"command": "resolvent", "relation": "commutator", "params": {"lambda": 1, "nu": 1, "f": [1, 0], "g": [0, 1]},
                 "grid": [16, 32]}]}"#,
            ),
            None,
        );
        assert!(report.pass, "{report:#?}");
        let json = report.to_json().unwrap();
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        let ratio = report.rows.iter().find(|r| r.metric == "ratio").unwrap();
        assert_eq!(ratio.value, json!("6/5"));
        assert!(report.to_csv().unwrap().lines().count() == report.rows.len() + 1);
    }

    #[test]
    fn cp_ensemble_requires_seed() {
        let s = spec(
            r#"{"cells": [{"command": "cp-ensemble", "gens": [[1, 0]], "ops": ["W[-1,0]", "W[1,0]"], "grid": [2], "samples": 4}]}"#,
        );
        assert!(run_sweep(&s, None).error.is_some());
        let report = run_sweep(&s, Some(9));
        assert!(report.pass, "{report:#?}");
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0].iter().map(|&x: &f64| (x, 3.0 * x.powf(-0.5))).collect();
        assert!((loglog_slope(&pts).unwrap() + 0.5).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
    }

    #[test]
    fn csv_of_tables() {
        let table = json!([{"op": "W[1,0]", "k": 5, "trace": [0.0, 0.0]}, {"op": "x", "extra": null}]);
        let csv = json_to_csv(&table).unwrap();
        assert_eq!(csv, "k,op,trace,extra\n5,\"W[1,0]\",\"[0.0,0.0]\",\n,x,,\n");
    }

    #[test]
    fn predicted_norm_cases() {
        let space = Arc::new(SymplecticSpace::standard(1).unwrap());
        let model = LatticeModel::new(&space, vec![VecX::from_ints(&[1, 0])], BoxShape::Symmetric, 3).unwrap();
        let ops = parse_ops(&["W[1,0]+W[-1,0]".into()], &space).unwrap();
        let a = ops[0].1.to_weyl(&space).unwrap();
        let p = predicted_norm(&model, &a).unwrap();
        assert!((p - 2.0 * (std::f64::consts::PI / 8.0).cos()).abs() < 1e-15);
    }
}
