//! Combined benchmark report: runtime table, memory budget, dataset counts,
//! accuracies, and the energy model — as human-readable text and CSV.

use std::fmt;

use super::energy::EnergyReport;
use super::{Stage, StageTimings, Statistic};
use crate::error::{Error, Result};
use crate::nn::{activation_arena_bytes, ModelArtifact, PARAM_BUDGET_BYTES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryReport {
    /// INT8 parameter bytes (1 per weight, 4 per bias).
    pub param_bytes: usize,
    /// Peak live int8 activation bytes under a ping-pong buffer model.
    pub activation_bytes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetCounts {
    pub train: usize,
    pub test: usize,
    pub train_good: usize,
    pub train_bad: usize,
    pub test_good: usize,
    pub test_bad: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyReport {
    pub float_test: f64,
    pub int8_test: f64,
}

/// A full report. Runtime and memory sections are always present; the rest
/// appear when the producing pipeline computed them.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub timings: StageTimings,
    pub memory: MemoryReport,
    pub energy: Option<EnergyReport>,
    pub dataset: Option<DatasetCounts>,
    pub accuracy: Option<AccuracyReport>,
}

/// Assemble a report from timings, an optional energy model evaluation, and
/// the model's memory figures.
pub fn report(
    timings: StageTimings,
    energy: Option<EnergyReport>,
    model: &ModelArtifact,
) -> Result<Report> {
    let param_bytes = match &model.quant {
        Some(q) => q.param_bytes(),
        None => model.param_budget(),
    };
    let activation_bytes = activation_arena_bytes(&model.layers, model.input_shape)?;
    Ok(Report {
        timings,
        memory: MemoryReport {
            param_bytes,
            activation_bytes,
        },
        energy,
        dataset: None,
        accuracy: None,
    })
}

impl Report {
    /// Stable-order CSV: `section,key,value` rows; the runtime section holds
    /// exactly the seven pipeline stages in order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,key,value\n");
        out.push_str(&format!("meta,reps,{}\n", self.timings.reps));
        out.push_str(&format!("meta,statistic,{}\n", self.timings.statistic));
        out.push_str(&format!(
            "meta,end_to_end_ns,{}\n",
            self.timings.end_to_end_ns
        ));
        for (stage, ns) in &self.timings.stages {
            out.push_str(&format!("runtime,{}_ns,{}\n", stage.key(), ns));
        }
        out.push_str(&format!("memory,param_bytes,{}\n", self.memory.param_bytes));
        out.push_str(&format!(
            "memory,activation_bytes,{}\n",
            self.memory.activation_bytes
        ));
        if let Some(d) = &self.dataset {
            out.push_str(&format!("dataset,train,{}\n", d.train));
            out.push_str(&format!("dataset,test,{}\n", d.test));
            out.push_str(&format!("dataset,train_good,{}\n", d.train_good));
            out.push_str(&format!("dataset,train_bad,{}\n", d.train_bad));
            out.push_str(&format!("dataset,test_good,{}\n", d.test_good));
            out.push_str(&format!("dataset,test_bad,{}\n", d.test_bad));
        }
        if let Some(a) = &self.accuracy {
            out.push_str(&format!("accuracy,float_test,{}\n", a.float_test));
            out.push_str(&format!("accuracy,int8_test,{}\n", a.int8_test));
        }
        if let Some(e) = &self.energy {
            out.push_str(&format!("energy,vdd_avg_v,{}\n", e.vdd_avg));
            out.push_str(&format!("energy,idd_avg_a,{}\n", e.idd_avg));
            out.push_str(&format!("energy,p_avg_w,{}\n", e.p_avg));
            out.push_str(&format!("energy,epi_j,{}\n", e.epi));
            out.push_str(&format!("energy,t_infer_s,{}\n", e.t_infer));
        }
        out
    }

    /// Parse a CSV produced by [`Report::to_csv`]. Exact inverse: parsing and
    /// re-emitting yields the identical report.
    pub fn parse_csv(text: &str) -> Result<Report> {
        let bad = |reason: String| Error::InvalidConfig(format!("report csv: {reason}"));
        let mut lines = text.lines();
        if lines.next() != Some("section,key,value") {
            return Err(bad("missing header".into()));
        }
        let mut rows: Vec<(String, String, String)> = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, ',');
            let section = parts.next().unwrap_or_default();
            let key = parts.next().ok_or_else(|| bad(format!("bad row {line:?}")))?;
            let value = parts.next().ok_or_else(|| bad(format!("bad row {line:?}")))?;
            rows.push((section.into(), key.into(), value.into()));
        }

        let find = |section: &str, key: &str| -> Option<&str> {
            rows.iter()
                .find(|(s, k, _)| s == section && k == key)
                .map(|(_, _, v)| v.as_str())
        };
        let need = |section: &str, key: &str| -> Result<&str> {
            find(section, key).ok_or_else(|| bad(format!("{section},{key} missing")))
        };
        fn parse<T: std::str::FromStr>(v: &str, what: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("report csv: bad {what} {v:?}")))
        }

        let reps: usize = parse(need("meta", "reps")?, "reps")?;
        let statistic = match need("meta", "statistic")? {
            "median" => Statistic::Median,
            "mean" => Statistic::Mean,
            other => return Err(bad(format!("unknown statistic {other:?}"))),
        };
        let end_to_end_ns: u64 = parse(need("meta", "end_to_end_ns")?, "end_to_end_ns")?;

        // Runtime rows must be exactly the seven stages in pipeline order.
        let runtime_rows: Vec<&(String, String, String)> =
            rows.iter().filter(|(s, _, _)| s == "runtime").collect();
        if runtime_rows.len() != Stage::ALL.len() {
            return Err(bad(format!(
                "expected {} runtime rows, found {}",
                Stage::ALL.len(),
                runtime_rows.len()
            )));
        }
        let mut stages = Vec::with_capacity(Stage::ALL.len());
        for (stage, row) in Stage::ALL.iter().zip(runtime_rows) {
            let expected_key = format!("{}_ns", stage.key());
            if row.1 != expected_key {
                return Err(bad(format!(
                    "runtime row {:?} out of order, expected {expected_key}",
                    row.1
                )));
            }
            stages.push((*stage, parse::<u64>(&row.2, "stage time")?));
        }

        let memory = MemoryReport {
            param_bytes: parse(need("memory", "param_bytes")?, "param_bytes")?,
            activation_bytes: parse(need("memory", "activation_bytes")?, "activation_bytes")?,
        };

        let dataset = if find("dataset", "train").is_some() {
            Some(DatasetCounts {
                train: parse(need("dataset", "train")?, "train")?,
                test: parse(need("dataset", "test")?, "test")?,
                train_good: parse(need("dataset", "train_good")?, "train_good")?,
                train_bad: parse(need("dataset", "train_bad")?, "train_bad")?,
                test_good: parse(need("dataset", "test_good")?, "test_good")?,
                test_bad: parse(need("dataset", "test_bad")?, "test_bad")?,
            })
        } else {
            None
        };

        let accuracy = if find("accuracy", "float_test").is_some() {
            Some(AccuracyReport {
                float_test: parse(need("accuracy", "float_test")?, "float_test")?,
                int8_test: parse(need("accuracy", "int8_test")?, "int8_test")?,
            })
        } else {
            None
        };

        let energy = if find("energy", "p_avg_w").is_some() {
            Some(EnergyReport {
                vdd_avg: parse(need("energy", "vdd_avg_v")?, "vdd_avg_v")?,
                idd_avg: parse(need("energy", "idd_avg_a")?, "idd_avg_a")?,
                p_avg: parse(need("energy", "p_avg_w")?, "p_avg_w")?,
                epi: parse(need("energy", "epi_j")?, "epi_j")?,
                t_infer: parse(need("energy", "t_infer_s")?, "t_infer_s")?,
            })
        } else {
            None
        };

        Ok(Report {
            timings: StageTimings {
                stages,
                reps,
                statistic,
                end_to_end_ns,
            },
            memory,
            energy,
            dataset,
            accuracy,
        })
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "runtime breakdown ({} of {} reps; host-absolute, not comparable to on-target figures)",
            self.timings.statistic, self.timings.reps
        )?;
        for (stage, ns) in &self.timings.stages {
            writeln!(f, "  {:<34} {:>12.3} ms", stage.label(), *ns as f64 / 1e6)?;
        }
        writeln!(
            f,
            "  {:<34} {:>12.3} ms",
            "end-to-end",
            self.timings.end_to_end_ns as f64 / 1e6
        )?;
        writeln!(f, "memory")?;
        writeln!(
            f,
            "  parameter bytes: {} (budget {})",
            self.memory.param_bytes, PARAM_BUDGET_BYTES
        )?;
        writeln!(f, "  activation bytes: {}", self.memory.activation_bytes)?;
        if let Some(d) = &self.dataset {
            writeln!(f, "dataset")?;
            writeln!(
                f,
                "  train: {} ({} good / {} bad)",
                d.train, d.train_good, d.train_bad
            )?;
            writeln!(
                f,
                "  test:  {} ({} good / {} bad)",
                d.test, d.test_good, d.test_bad
            )?;
        }
        if let Some(a) = &self.accuracy {
            writeln!(f, "accuracy")?;
            writeln!(f, "  float test: {:.4}", a.float_test)?;
            writeln!(f, "  int8 test:  {:.4}", a.int8_test)?;
        }
        if let Some(e) = &self.energy {
            writeln!(f, "energy")?;
            writeln!(f, "  vdd_avg: {:.4} V", e.vdd_avg)?;
            writeln!(f, "  idd_avg: {:.4} mA", e.idd_avg * 1e3)?;
            writeln!(f, "  p_avg:   {:.4} mW", e.p_avg * 1e3)?;
            writeln!(
                f,
                "  epi:     {:.4} mJ at t_infer {:.1} ms",
                e.epi * 1e3,
                e.t_infer * 1e3
            )?;
        }
        Ok(())
    }
}
