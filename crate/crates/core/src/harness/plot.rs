//! CSV series for external plotting, derived from a finished run directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::run::{sha256_hex, RunRecord};
use super::scenario::Task;
use crate::error::{Error, Result};
use crate::lattice::io::{decode_field, write_atomic};
use crate::lattice::GridField;

pub const PLOT_DIR: &str = "plot";

struct Reader<'a> {
    dir: &'a Path,
    record: &'a RunRecord,
}

impl Reader<'_> {
    fn has(&self, rel: &str) -> bool {
        self.record.output(rel).is_some()
    }

    /// Bytes of a listed output, checked against the recorded hash.
    fn bytes(&self, rel: &str) -> Result<Vec<u8>> {
        let entry = self
            .record
            .output(rel)
            .ok_or_else(|| Error::MissingOutput(format!("run record does not list {rel}")))?;
        let path = self.dir.join(rel);
        let bytes = std::fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingOutput(format!("{} is missing", path.display())),
            _ => Error::io(&path, e),
        })?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::Format(format!("{rel} does not match its recorded hash")));
        }
        Ok(bytes)
    }

    fn field(&self, rel: &str) -> Result<GridField> {
        decode_field(&self.bytes(rel)?)
    }

    fn json(&self, rel: &str) -> Result<Value> {
        Ok(serde_json::from_slice(&self.bytes(rel)?)?)
    }

    /// Node indices listed in a region CSV.
    fn nodes(&self, rel: &str) -> Result<Vec<usize>> {
        let text = String::from_utf8(self.bytes(rel)?).map_err(|_| Error::Format(format!("{rel} is not UTF-8")))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .next()
                    .and_then(|t| t.trim().parse().ok())
                    .ok_or_else(|| Error::Format(format!("{rel}: bad line '{l}'")))
            })
            .collect()
    }
}

fn num(v: &Value, what: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::Format(format!("{what} is not a number")))
}

fn array<'a>(v: &'a Value, key: &str) -> Result<&'a Vec<Value>> {
    v.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Format(format!("missing array '{key}'")))
}

fn coord_header(dim: usize) -> &'static str {
    if dim == 1 {
        "x"
    } else {
        "x,y"
    }
}

fn coords(u: &GridField, i: usize) -> String {
    let [x, y] = u.grid().node_coords(i);
    if u.grid().dim() == 1 {
        format!("{x}")
    } else {
        format!("{x},{y}")
    }
}

/// `true,estimate` over the effective set.
fn truth_vs_estimate(r: &Reader, truth: &str, stem: &str) -> Result<String> {
    let t = r.field(truth)?;
    let e = r.field(&format!("{stem}.pfl"))?;
    let mut out = String::from("true,estimate\n");
    for i in r.nodes(&format!("{stem}_E.csv"))? {
        writeln!(out, "{},{}", t.values()[i], e.values()[i]).unwrap();
    }
    Ok(out)
}

fn task_series(r: &Reader) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    match r.record.task {
        Task::Forward => {
            let u = r.field("u.pfl")?;
            let exact = if r.has("exact.pfl") { Some(r.field("exact.pfl")?) } else { None };
            let mut out = format!("{},u", coord_header(u.grid().dim()));
            out.push_str(if exact.is_some() { ",exact\n" } else { "\n" });
            for i in 0..u.len() {
                write!(out, "{},{}", coords(&u, i), u.values()[i]).unwrap();
                match &exact {
                    Some(ex) => writeln!(out, ",{}", ex.values()[i]).unwrap(),
                    None => out.push('\n'),
                }
            }
            files.push(("solution.csv".into(), out));
        }
        Task::Dtn => {
            let d = r.field("dtn.pfl")?;
            let mut out = format!("{},value\n", coord_header(d.grid().dim()));
            for i in r.nodes("omega.csv")? {
                writeln!(out, "{},{}", coords(&d, i), d.values()[i]).unwrap();
            }
            files.push(("dtn.csv".into(), out));
        }
        Task::RecoverQ => files.push(("q_vs_estimate.csv".into(), truth_vs_estimate(r, "q_true.pfl", "q_hat")?)),
        Task::RecoverAlpha => files.push((
            "alpha_vs_estimate.csv".into(),
            truth_vs_estimate(r, "alpha_true.pfl", "alpha_hat")?,
        )),
        Task::RecoverTaylor => {
            let mut l = 0;
            while r.has(&format!("taylor_l{l}.pfl")) {
                let series = truth_vs_estimate(r, &format!("taylor_true_l{l}.pfl"), &format!("taylor_l{l}"))?;
                files.push((format!("taylor_l{l}_vs_estimate.csv"), series));
                l += 1;
            }
            if r.has("linearization.json") {
                let lin = r.json("linearization.json")?;
                let mut out = String::from("eps,error\n");
                for (e, err) in array(&lin, "eps")?.iter().zip(array(&lin, "errors")?) {
                    writeln!(out, "{},{}", num(e, "eps")?, num(err, "error")?).unwrap();
                }
                let slope = num(lin.get("fitted_slope").unwrap_or(&Value::Null), "fitted_slope")?;
                writeln!(out, "slope,{slope}").unwrap();
                files.push(("linearization.csv".into(), out));
            }
        }
        Task::UcpSuite => {
            if r.has("ucp/interior_gaps.json") {
                let rows = r.json("ucp/interior_gaps.json")?;
                let mut out = String::from("operator,n,min_singular_value,floor,admissibility\n");
                for row in rows.as_array().into_iter().flatten() {
                    let rep = &row["report"];
                    writeln!(
                        out,
                        "{},{},{},{},{}",
                        row["operator"].as_str().unwrap_or(""),
                        row["points"],
                        num(&rep["min_singular_value"], "min_singular_value")?,
                        num(&rep["floor"], "floor")?,
                        row["admissibility"].as_str().unwrap_or("")
                    )
                    .unwrap();
                }
                files.push(("gaps.csv".into(), out));
            }
            if r.has("ucp/poincare.json") {
                let p = r.json("ucp/poincare.json")?;
                let mut out = String::from("samples,estimate\n");
                for (n, v) in array(&p, "samples")?.iter().zip(array(&p, "estimates")?) {
                    writeln!(out, "{n},{}", num(v, "estimate")?).unwrap();
                }
                files.push(("poincare.csv".into(), out));
            }
        }
        Task::Admissibility => {
            let mut out = String::from("case,status\n");
            for o in &r.record.outputs {
                if let Some(name) = o.path.strip_prefix("admissibility/").and_then(|p| p.strip_suffix(".json")) {
                    let v = r.json(&o.path)?;
                    writeln!(out, "{name},{}", v["status"].as_str().unwrap_or("")).unwrap();
                }
            }
            files.push(("verdicts.csv".into(), out));
        }
        Task::FracopChecks => {
            if r.has("checks/convergence.json") {
                let recs = r.json("checks/convergence.json")?;
                let mut out = String::from("order,n,error\n");
                let mut footer = String::new();
                for rec in recs.as_array().into_iter().flatten() {
                    let order = num(&rec["order"], "order")?;
                    for (n, e) in array(rec, "sizes")?.iter().zip(array(rec, "errors")?) {
                        writeln!(out, "{order},{n},{}", num(e, "error")?).unwrap();
                    }
                    writeln!(footer, "slope,{order},{}", num(&rec["fitted_order"], "fitted_order")?).unwrap();
                }
                out.push_str(&footer);
                files.push(("convergence.csv".into(), out));
            }
            let mut out = String::from("check,case,rel_error\n");
            for name in ["symbol", "semigroup", "functional_calculus"] {
                let rel = format!("checks/{name}.json");
                if r.has(&rel) {
                    for (k, c) in array(&r.json(&rel)?, "cases")?.iter().enumerate() {
                        writeln!(out, "{name},{k},{}", num(&c["rel_error"], "rel_error")?).unwrap();
                    }
                }
            }
            files.push(("check_cases.csv".into(), out));
        }
    }
    Ok(files)
}

/// Writes per-task CSV series into `<run_dir>/plot/` and returns their paths.
/// Every input is read and verified before the first file is written, so a
/// failure leaves no partial output.
pub fn emit_plot_data(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let record = RunRecord::load(run_dir)?;
    if let Some(e) = &record.error {
        return Err(Error::MissingOutput(format!("run failed, nothing to plot: {e}")));
    }
    if record.outputs.iter().all(|o| o.path == super::run::SCENARIO_COPY) {
        return Err(Error::MissingOutput("run record lists no outputs".into()));
    }
    let files = task_series(&Reader {
        dir: run_dir,
        record: &record,
    })?;
    if files.is_empty() {
        return Err(Error::MissingOutput("no plottable outputs in this run".into()));
    }
    let dir = run_dir.join(PLOT_DIR);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    files
        .into_iter()
        .map(|(name, text)| {
            let path = dir.join(name);
            write_atomic(&path, text.as_bytes())?;
            Ok(path)
        })
        .collect()
}
