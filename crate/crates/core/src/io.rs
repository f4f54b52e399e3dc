//! Files: JSON run configurations, CSV records and state tables, JSON
//! calibrations and manifests.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::engine::{Calibration, RecordData, Run, RunConfig};
use crate::error::{Error, Result};
use crate::fields::derived_quantities;
use crate::model::{HybridState, TrajectoryRecord};
use crate::C64;

/// Unit system of the rates in a configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    /// Rates in arbitrary inverse time units, taken as given.
    #[default]
    Kappa,
    /// Rates as ordinary frequencies in MHz, times in microseconds.
    Mhz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ConfigFile {
    #[serde(flatten)]
    run: RunConfig,
    #[serde(default)]
    units: Units,
}

/// Parses a JSON run configuration, converting rates to angular units.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let file: ConfigFile = serde_json::from_str(text)?;
    let mut run = file.run;
    if file.units == Units::Mhz {
        let s = &mut run.system;
        for x in [&mut s.detuning_rd, &mut s.chi, &mut s.kappa, &mut s.kappa_out, &mut s.kappa_col] {
            *x *= TAU;
        }
        s.drive = crate::model::Schedule::from_segments(
            s.drive
                .segments()
                .iter()
                .map(|seg| crate::model::Segment { start: seg.start, value: seg.value * TAU })
                .collect(),
        );
        run.measurement.gamma_int *= TAU;
    }
    Ok(run)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_calibration(path: &Path) -> Result<Calibration> {
    read_json(path)
}

fn parse_number(field: &str, row: usize, column: &str) -> Result<f64> {
    let x: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Record(format!("row {row}, column {column}: cannot parse {field:?}")))?;
    if !x.is_finite() {
        return Err(Error::Record(format!("row {row}, column {column}: non-finite value")));
    }
    Ok(x)
}

/// Reads a record with header `t,I` or `t,I,Q`.
pub fn read_record<R: Read>(reader: R) -> Result<RecordData> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = csv.headers()?.iter().map(str::to_owned).collect();
    let has_q = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["t", "I"] => false,
        ["t", "I", "Q"] => true,
        _ => return Err(Error::Record(format!("header must be t,I or t,I,Q, found {}", header.join(",")))),
    };
    let mut data = RecordData { q: has_q.then(Vec::new), ..Default::default() };
    for (row, rec) in csv.records().enumerate() {
        let rec = rec.map_err(|e| Error::Record(e.to_string()))?;
        data.times.push(parse_number(&rec[0], row + 1, "t")?);
        data.i.push(parse_number(&rec[1], row + 1, "I")?);
        if let Some(q) = data.q.as_mut() {
            q.push(parse_number(&rec[2], row + 1, "Q")?);
        }
    }
    data.check_times()?;
    Ok(data)
}

pub fn load_record(path: &Path) -> Result<RecordData> {
    read_record(BufReader::new(File::open(path)?))
}

pub fn write_record<W: Write>(writer: W, data: &RecordData) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    match &data.q {
        Some(q) => {
            w.write_record(["t", "I", "Q"])?;
            for k in 0..data.times.len() {
                w.write_record(&[data.times[k].to_string(), data.i[k].to_string(), q[k].to_string()])?;
            }
        }
        None => {
            w.write_record(["t", "I"])?;
            for k in 0..data.times.len() {
                w.write_record(&[data.times[k].to_string(), data.i[k].to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_record(path: &Path, data: &RecordData) -> Result<()> {
    write_record(BufWriter::new(File::create(path)?), data)
}

const STATE_COLUMNS: [&str; 17] = [
    "t",
    "rho00",
    "rho11",
    "rho10_re",
    "rho10_im",
    "alpha0_re",
    "alpha0_im",
    "alpha1_re",
    "alpha1_im",
    "phase0",
    "phase1",
    "gamma_d",
    "stark_s",
    "phi_opt",
    "delta_i",
    "back_action_k",
    "gamma",
];

/// Writes the state on the grid with the derived quantities at each time.
pub fn write_states<W: Write>(writer: W, run: &Run, states: &[HybridState]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(STATE_COLUMNS)?;
    for (t, s) in run.times.iter().zip(states) {
        let d = derived_quantities(s, run.params(), run.settings(), *t);
        let row = [
            *t,
            s.rho00(),
            s.rho11(),
            s.rho10().re,
            s.rho10().im,
            s.alpha0().re,
            s.alpha0().im,
            s.alpha1().re,
            s.alpha1().im,
            s.phase0(),
            s.phase1(),
            d.gamma_d,
            d.stark_s,
            d.phi_opt,
            d.delta_i,
            d.back_action_k,
            d.gamma,
        ];
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_states(path: &Path, run: &Run, states: &[HybridState]) -> Result<()> {
    write_states(BufWriter::new(File::create(path)?), run, states)
}

/// Reads back the times and states of a state table.
pub fn read_states<R: Read>(reader: R) -> Result<(Vec<f64>, Vec<HybridState>)> {
    let mut csv = csv::Reader::from_reader(reader);
    if csv.headers()?.iter().collect::<Vec<_>>() != STATE_COLUMNS {
        return Err(Error::Record("unexpected state table header".into()));
    }
    let (mut times, mut states) = (Vec::new(), Vec::new());
    for (row, rec) in csv.records().enumerate() {
        let rec = rec?;
        let x = |k: usize| parse_number(&rec[k], row + 1, STATE_COLUMNS[k]);
        times.push(x(0)?);
        states.push(
            HybridState::new(x(1)?, x(2)?, C64::new(x(3)?, x(4)?), C64::new(x(5)?, x(6)?), C64::new(x(7)?, x(8)?))?
                .with_phases(x(9)?, x(10)?),
        );
    }
    Ok((times, states))
}

/// One simulated trajectory in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: u64,
    pub seed: u64,
    pub record: String,
    pub states: String,
    pub calibration: String,
    pub final_rho11: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub trajectories: usize,
    pub config: RunConfig,
    pub entries: Vec<ManifestEntry>,
    pub summary: Option<String>,
}

/// Filter result written next to the state table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub states: String,
    pub log_likelihood_global: f64,
    pub log_likelihood_local: f64,
    pub final_rho11: f64,
    pub final_rho10: C64,
}

/// Record rows and calibration for a simulated trajectory.
pub fn trajectory_files(record: &TrajectoryRecord) -> (RecordData, Calibration) {
    (crate::engine::record_rows(record), crate::engine::simulated_calibration(record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_trajectory, Trace};

    const CONFIG: &str = r#"{
        "system": {"detuning_rd": 0.0, "chi": 0.5, "kappa": 1.0, "kappa_out": 1.0, "kappa_col": 1.0,
                   "drive": [{"start": 0.0, "value": [1.0, 0.0]}]},
        "measurement": {"mode": "phase_preserving", "spectral_density": 2.0},
        "grid": {"t_end": 1.0, "dt": 0.05},
        "initial": {"rho00": 0.5, "rho11": 0.5, "rho10": [0.5, 0.0]},
        "seed": 4
    }"#;

    #[test]
    fn config_defaults() {
        let cfg = parse_config(CONFIG).unwrap();
        assert_eq!(cfg.measurement.eta_amp, 1.0);
        assert_eq!(cfg.initial.alpha_in, C64::new(0.0, 0.0));
        assert_eq!(cfg.system.kappa, 1.0);
        let run = cfg.prepare().unwrap();
        assert_eq!(run.times.len(), 21);
    }

    #[test]
    fn mhz_units_scale_rates() {
        let text = CONFIG.replacen("\"seed\": 4", "\"seed\": 4, \"units\": \"mhz\"", 1);
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.system.kappa, TAU);
        assert_eq!(cfg.system.chi, 0.5 * TAU);
        assert_eq!(cfg.system.drive.value_at(0.0), C64::new(TAU, 0.0));
        assert_eq!(cfg.grid.t_end, 1.0);
    }

    #[test]
    fn config_errors_are_usage_errors() {
        let e = parse_config("{\"system\": 3}").unwrap_err();
        assert!(e.is_usage());
        let text = CONFIG.replace("\"kappa_col\": 1.0", "\"kappa_col\": 2.0");
        let e = parse_config(&text).unwrap().prepare().unwrap_err();
        assert!(e.is_usage());
        assert!(e.to_string().contains("kappa_col"));
    }

    #[test]
    fn config_round_trip() {
        let cfg = parse_config(CONFIG).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    #[test]
    fn record_round_trip() {
        let run = parse_config(CONFIG).unwrap().prepare().unwrap();
        let rec = run_trajectory(&run, 4).unwrap();
        let (rows, cal) = trajectory_files(&rec);
        let mut buf = Vec::new();
        write_record(&mut buf, &rows).unwrap();
        assert!(buf.starts_with(b"t,I,Q\n"));
        assert_eq!(read_record(buf.as_slice()).unwrap(), rows);
        let text = serde_json::to_string(&cal).unwrap();
        assert_eq!(serde_json::from_str::<Calibration>(&text).unwrap(), cal);
    }

    #[test]
    fn state_table_round_trip() {
        let run = parse_config(CONFIG).unwrap().prepare().unwrap();
        let rec = run_trajectory(&run, 4).unwrap();
        let mut buf = Vec::new();
        write_states(&mut buf, &run, &rec.states).unwrap();
        let (times, states) = read_states(buf.as_slice()).unwrap();
        assert_eq!(times, rec.times);
        assert_eq!(states, rec.states);
    }

    #[test]
    fn record_errors() {
        assert!(matches!(read_record("t,X\n0,1\n".as_bytes()), Err(Error::Record(_))));
        assert!(matches!(read_record("t,I\n0,1\n0,2\n".as_bytes()), Err(Error::Record(_))));
        assert!(matches!(read_record("t,I\n0,abc\n".as_bytes()), Err(Error::Record(_))));
        assert!(matches!(read_record("t,I\n0,NaN\n".as_bytes()), Err(Error::Record(_))));
        assert!(matches!(read_record("t,I,Q\n0,1\n".as_bytes()), Err(Error::Record(_))));
        let ok = read_record("t, I\n0, 1.5\n0.1, -2\n".as_bytes()).unwrap();
        assert_eq!(ok.i, vec![1.5, -2.0]);
        assert!(ok.q.is_none());
    }

    #[test]
    fn calibration_forms() {
        let c: Calibration = serde_json::from_str(r#"{"spectral_density": 1.0, "i0": -1.0, "i1": [1.0, 2.0]}"#).unwrap();
        assert_eq!(c.i0, Trace::Constant(-1.0));
        assert_eq!(c.i1, Trace::Samples(vec![1.0, 2.0]));
        assert_eq!(c.q0, Trace::Constant(0.0));
    }
}
