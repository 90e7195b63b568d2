//! Reading and writing scenario datasets.
//!
//! A dataset is a directory of scenario JSON files, one per vehicle, each
//! pointing at a trajectory CSV (and optionally a front-vehicle CSV) by a
//! path relative to the JSON file. Trajectory CSVs have the header
//! `vehicle_id,t,x,y,v,a,psi` in SI units; one file may hold several
//! vehicles.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::resample_points;
use crate::error::{Error, Result};
use crate::intention::label_trajectory;
use crate::sim::{ScenarioRecord, D_LABEL};
use crate::types::{EnvironmentState, Intention, Trajectory, TrajectoryPoint, DEFAULT_TAU};

pub const CSV_COLUMNS: [&str; 7] = ["vehicle_id", "t", "x", "y", "v", "a", "psi"];
/// Speeds above this are taken as a unit error (ft/s, km/h).
pub const MAX_PLAUSIBLE_SPEED: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub vehicle_id: String,
    pub yellow_onset: f64,
    pub yellow_duration: f64,
    pub stop_bar_x: f64,
    pub v_lim: f64,
    pub x_queue: f64,
    pub i_launch: usize,
    #[serde(default = "default_a_max_naive")]
    pub a_max_naive: f64,
    pub trajectory_csv: String,
    #[serde(default)]
    pub fv_csv_path: Option<String>,
    /// Which vehicle in the front-vehicle CSV to use, if it holds several.
    #[serde(default)]
    pub fv_vehicle_id: Option<String>,
    /// Ground-truth intention; derived from the trajectory when absent.
    #[serde(default)]
    pub intention: Option<Intention>,
    #[serde(default)]
    pub lambda: Option<f64>,
}

fn default_a_max_naive() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<ScenarioRecord>,
    /// Rows dropped during ingestion, with file and row numbers.
    pub diagnostics: Vec<String>,
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn trajectory_csv(vehicle_id: &str, traj: &Trajectory) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for p in traj.points() {
        w.write_record([
            vehicle_id.to_string(),
            p.t.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            p.v.to_string(),
            p.a.to_string(),
            p.psi.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Write records as `<id>.json` + `<id>.csv` (+ `<id>_fv.csv`) into `dir`.
pub fn write_dataset(dir: &Path, records: &[ScenarioRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for r in records {
        let id = &r.vehicle_id;
        let csv_name = format!("{id}.csv");
        write_atomic(&dir.join(&csv_name), &trajectory_csv(id, &r.trajectory)?)?;
        let fv_name = match &r.env.fv_trajectory {
            Some(fv) => {
                let name = format!("{id}_fv.csv");
                write_atomic(&dir.join(&name), &trajectory_csv(&format!("{id}_fv"), fv)?)?;
                Some(name)
            }
            None => None,
        };
        let e = &r.env;
        let file = ScenarioFile {
            vehicle_id: id.clone(),
            yellow_onset: e.yellow_onset,
            yellow_duration: e.yellow_duration,
            stop_bar_x: e.stop_bar_x,
            v_lim: e.v_lim,
            x_queue: e.x_queue,
            i_launch: e.i_launch,
            a_max_naive: e.a_max_naive,
            trajectory_csv: csv_name,
            fv_csv_path: fv_name,
            fv_vehicle_id: None,
            intention: Some(r.intention),
            lambda: r.lambda,
        };
        let mut json = serde_json::to_vec_pretty(&file)?;
        json.push(b'\n');
        write_atomic(&dir.join(format!("{id}.json")), &json)?;
    }
    Ok(())
}

/// Load every `*.json` scenario in `dir`, in file-name order.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::ingestion(dir, e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::ingestion(dir, "no scenario JSON files"));
    }
    let mut ds = Dataset::default();
    let mut cache: BTreeMap<PathBuf, CsvTable> = BTreeMap::new();
    for p in &paths {
        let rec = load_scenario(p, &mut cache, &mut ds.diagnostics)?;
        ds.records.push(rec);
    }
    Ok(ds)
}

fn load_scenario(
    path: &Path,
    cache: &mut BTreeMap<PathBuf, CsvTable>,
    diagnostics: &mut Vec<String>,
) -> Result<ScenarioRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::ingestion(path, e.to_string()))?;
    let file: ScenarioFile =
        serde_json::from_str(&text).map_err(|e| Error::ingestion(path, e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));

    let mut table = |rel: &str, diagnostics: &mut Vec<String>| -> Result<CsvTable> {
        let p = base.join(rel);
        if let Some(t) = cache.get(&p) {
            return Ok(t.clone());
        }
        let t = read_csv(&p, diagnostics)?;
        cache.insert(p, t.clone());
        Ok(t)
    };
    let traj_path = base.join(&file.trajectory_csv);
    let trajectory =
        table(&file.trajectory_csv, diagnostics)?.vehicle(&traj_path, Some(&file.vehicle_id))?;
    let fv_trajectory = match &file.fv_csv_path {
        Some(rel) => {
            let p = base.join(rel);
            Some(table(rel, diagnostics)?.vehicle(&p, file.fv_vehicle_id.as_deref())?)
        }
        None => None,
    };
    let env = EnvironmentState {
        yellow_onset: file.yellow_onset,
        yellow_duration: file.yellow_duration,
        stop_bar_x: file.stop_bar_x,
        v_lim: file.v_lim,
        fv_trajectory,
        x_queue: file.x_queue,
        i_launch: file.i_launch,
        a_max_naive: file.a_max_naive,
    };
    env.validate()
        .map_err(|e| Error::ingestion(path, e.to_string()))?;
    let intention = match file.intention {
        Some(i) => i,
        None => label_trajectory(&trajectory, &env, D_LABEL)
            .map_err(|e| Error::ingestion(path, e.to_string()))?,
    };
    Ok(ScenarioRecord {
        vehicle_id: file.vehicle_id,
        trajectory,
        env,
        intention,
        lambda: file.lambda,
    })
}

/// Rows of one CSV file grouped by vehicle, with their line numbers.
#[derive(Debug, Clone)]
struct CsvTable {
    vehicles: BTreeMap<String, Vec<(usize, TrajectoryPoint)>>,
}

fn read_csv(path: &Path, diagnostics: &mut Vec<String>) -> Result<CsvTable> {
    let bad = |msg: String| Error::ingestion(path, msg);
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let mut idx = [0usize; 7];
    for (k, col) in CSV_COLUMNS.iter().enumerate() {
        idx[k] = headers
            .iter()
            .position(|h| h == *col)
            .ok_or_else(|| bad(format!("missing column `{col}`")))?;
    }
    let mut vehicles: BTreeMap<String, Vec<(usize, TrajectoryPoint)>> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| bad(format!("row {line}: {e}")))?;
        let field = |k: usize| row.get(idx[k]).unwrap_or("");
        let mut vals = [0.0; 6];
        for k in 1..7 {
            vals[k - 1] = field(k).parse::<f64>().map_err(|_| {
                bad(format!(
                    "row {line}: `{}` is not a number in column `{}`",
                    field(k),
                    CSV_COLUMNS[k]
                ))
            })?;
        }
        let [t, x, y, v, a, psi] = vals;
        let p = TrajectoryPoint::new(t, x, y, v, a, psi);
        if !p.is_finite() {
            diagnostics.push(format!(
                "{}: row {line}: non-finite value, row dropped",
                path.display()
            ));
            continue;
        }
        if v > MAX_PLAUSIBLE_SPEED {
            return Err(bad(format!(
                "row {line}: speed {v} m/s exceeds {MAX_PLAUSIBLE_SPEED} m/s; convert to SI units"
            )));
        }
        p.validate().map_err(|e| bad(format!("row {line}: {e}")))?;
        vehicles
            .entry(field(0).to_string())
            .or_default()
            .push((line, p));
    }
    Ok(CsvTable { vehicles })
}

impl CsvTable {
    fn vehicle(&self, path: &Path, id: Option<&str>) -> Result<Trajectory> {
        let rows = match id {
            Some(id) if self.vehicles.contains_key(id) => &self.vehicles[id],
            Some(id) if self.vehicles.len() != 1 => {
                return Err(Error::ingestion(
                    path,
                    format!("no rows for vehicle `{id}`"),
                ));
            }
            None if self.vehicles.len() != 1 => {
                return Err(Error::ingestion(
                    path,
                    format!(
                        "{} vehicles in file; specify which one",
                        self.vehicles.len()
                    ),
                ));
            }
            _ => self.vehicles.values().next().expect("one vehicle"),
        };
        if rows.is_empty() {
            return Err(Error::ingestion(path, "no usable rows"));
        }
        if let Some(w) = rows.windows(2).find(|w| w[1].1.t <= w[0].1.t) {
            return Err(Error::ingestion(
                path,
                format!(
                    "timestamps not increasing between rows {} (t={}) and {} (t={})",
                    w[0].0, w[0].1.t, w[1].0, w[1].1.t
                ),
            ));
        }
        let points: Vec<TrajectoryPoint> = rows.iter().map(|r| r.1).collect();
        let on_grid = points
            .windows(2)
            .all(|w| (w[1].t - w[0].t - DEFAULT_TAU).abs() <= 1e-9);
        let traj = if on_grid {
            Trajectory::new(points, DEFAULT_TAU)
        } else {
            resample_points(&points, DEFAULT_TAU)
        };
        traj.map_err(|e| Error::ingestion(path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_scenario, FvProfile, IntentPolicy, ScenarioConfig};

    fn record(seed: u64, fv: FvProfile) -> ScenarioRecord {
        generate_scenario(&ScenarioConfig {
            seed,
            policy: IntentPolicy::DilemmaZone,
            fv_profile: fv,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn roundtrip_preserves_records() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![record(1, FvProfile::None), record(2, FvProfile::Cruise)];
        write_dataset(dir.path(), &recs).unwrap();
        let ds = load_dataset(dir.path()).unwrap();
        assert!(ds.diagnostics.is_empty());
        assert_eq!(ds.records.len(), 2);
        for (a, b) in ds.records.iter().zip(&recs) {
            assert_eq!(a.intention, b.intention);
            assert_eq!(a.env.x_queue, b.env.x_queue);
            for (p, q) in a.trajectory.points().iter().zip(b.trajectory.points()) {
                for (u, w) in [
                    (p.t, q.t),
                    (p.x, q.x),
                    (p.y, q.y),
                    (p.v, q.v),
                    (p.a, q.a),
                    (p.psi, q.psi),
                ] {
                    assert!((u - w).abs() <= 1e-9);
                }
            }
            assert_eq!(a.env.fv_trajectory.is_some(), b.env.fv_trajectory.is_some());
        }
    }

    fn write(dir: &Path, csv: &str) -> PathBuf {
        fs::write(dir.join("v.csv"), csv).unwrap();
        let file = ScenarioFile {
            vehicle_id: "v".into(),
            yellow_onset: 0.0,
            yellow_duration: 0.2,
            stop_bar_x: 100.0,
            v_lim: 15.0,
            x_queue: 96.0,
            i_launch: 400,
            a_max_naive: 2.0,
            trajectory_csv: "v.csv".into(),
            fv_csv_path: None,
            fv_vehicle_id: None,
            intention: None,
            lambda: None,
        };
        fs::write(dir.join("v.json"), serde_json::to_string(&file).unwrap()).unwrap();
        dir.to_path_buf()
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "vehicle_id,t,x,y,v,a\nv,0,0,0,10,0\n");
        let err = load_dataset(dir.path()).unwrap_err().to_string();
        assert!(err.contains("`psi`"), "{err}");
    }

    #[test]
    fn shuffled_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "vehicle_id,t,x,y,v,a,psi\nv,0.0,0,0,10,0,0\nv,0.2,2,0,10,0,0\nv,0.1,1,0,10,0,0\n",
        );
        let err = load_dataset(dir.path()).unwrap_err().to_string();
        assert!(
            err.contains("not increasing") && err.contains("rows 3"),
            "{err}"
        );
    }

    #[test]
    fn implausible_speed_and_non_finite_rows() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "vehicle_id,t,x,y,v,a,psi\nv,0.0,0,0,88,0,0\nv,0.1,1,0,10,0,0\n",
        );
        let err = load_dataset(dir.path()).unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("60"), "{err}");

        write(
            dir.path(),
            "vehicle_id,t,x,y,v,a,psi\nv,0.0,0,0,10,0,0\nv,0.1,NaN,0,10,0,0\nv,0.2,2,0,10,0,0\nv,0.3,3,0,10,0,0\n",
        );
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.diagnostics.len(), 1);
        assert!(ds.diagnostics[0].contains("row 3"));
        // Gap left by the dropped row is filled by resampling.
        assert_eq!(ds.records[0].trajectory.len(), 4);
        assert!((ds.records[0].trajectory.points()[1].x - 1.0).abs() < 1e-12);
        assert_eq!(ds.records[0].intention, Intention::Stop);
    }

    #[test]
    fn irregular_samples_are_resampled() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "vehicle_id,t,x,y,v,a,psi\nv,0.0,0,0,10,0,0\nv,0.25,2.5,0,10,0,0\nv,0.5,5,0,10,0,0\n",
        );
        let tr = &load_dataset(dir.path()).unwrap().records[0].trajectory;
        assert_eq!(tr.len(), 6);
        assert!((tr.points()[3].x - 3.0).abs() < 1e-12);
    }
}
