//! CSV ingestion: reads count and population tables, joins them into
//! validated observations, and persists a normalized dataset with a
//! checksum sidecar.
//!
//! Input format is headered UTF-8 CSV: `town,year,count` (optionally with a
//! `category` column) and `town,year,population`. Town identity is the
//! exact string key, trimmed of surrounding whitespace.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distributions::RateSample;
use crate::estimators::TownObservation;
use crate::{Error, Result};

/// Source paths and a content checksum for reproducibility reports.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub sources: Vec<String>,
    pub checksum: String,
}

/// A validated, immutable collection of observations with unique
/// (town, year) keys.
#[derive(Debug, Clone)]
pub struct Dataset {
    observations: Vec<TownObservation>,
    years: Vec<i32>,
    provenance: Provenance,
}

/// A loaded dataset plus per-row diagnostics for everything that was
/// dropped on the way in.
#[derive(Debug)]
pub struct LoadReport {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Dataset {
    /// Builds a dataset from observations, enforcing unique (town, year)
    /// pairs. Observations are kept sorted by (town, year).
    pub fn new(mut observations: Vec<TownObservation>, provenance: Provenance) -> Result<Self> {
        observations.sort_by(|a, b| a.town().cmp(b.town()).then(a.year().cmp(&b.year())));
        for pair in observations.windows(2) {
            if pair[0].town() == pair[1].town() && pair[0].year() == pair[1].year() {
                return Err(Error::Data(format!(
                    "duplicate observation for ({}, {})",
                    pair[0].town(),
                    pair[0].year()
                )));
            }
        }
        let mut years: Vec<i32> = observations.iter().map(|o| o.year()).collect();
        years.sort_unstable();
        years.dedup();
        Ok(Self {
            observations,
            years,
            provenance,
        })
    }

    pub fn observations(&self) -> &[TownObservation] {
        &self.observations
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Observations of one year, in ascending town order.
    pub fn year_observations(&self, year: i32) -> Result<Vec<&TownObservation>> {
        if !self.years.contains(&year) {
            return Err(Error::Data(format!("year {year} not present in dataset")));
        }
        Ok(self
            .observations
            .iter()
            .filter(|o| o.year() == year)
            .collect())
    }

    /// Pooled MLEs k/n for every town observed in `year`, ascending town
    /// order.
    pub fn rates(&self, year: i32) -> Result<RateSample> {
        let rates: Vec<f64> = self
            .year_observations(year)?
            .iter()
            .map(|o| o.count() as f64 / o.population() as f64)
            .collect();
        RateSample::new(rates)
    }

    /// Writes the normalized `town,year,count,population` CSV plus a
    /// `.sha256` sidecar.
    pub fn save_normalized(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["town", "year", "count", "population"])?;
        for o in &self.observations {
            writer.write_record([
                o.town().to_string(),
                o.year().to_string(),
                o.count().to_string(),
                o.population().to_string(),
            ])?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::Data(format!("csv flush failed: {e}")))?;
        fs::write(path, &bytes)?;
        fs::write(sidecar_path(path), sha256_hex(&bytes) + "\n")?;
        Ok(())
    }

    /// Loads a normalized CSV, verifying the checksum sidecar when present.
    pub fn load_normalized(path: &Path) -> Result<Dataset> {
        let bytes = fs::read(path)?;
        let checksum = sha256_hex(&bytes);
        let sidecar = sidecar_path(path);
        if sidecar.exists() {
            let expected = fs::read_to_string(&sidecar)?;
            if expected.trim() != checksum {
                return Err(Error::Data(format!(
                    "checksum mismatch for {}: sidecar says {}, content is {checksum}",
                    path.display(),
                    expected.trim()
                )));
            }
        }
        let mut reader = csv::Reader::from_reader(bytes.as_slice());
        let mut observations = Vec::new();
        for (i, row) in reader.deserialize::<NormalizedRow>().enumerate() {
            let row = row.map_err(|e| Error::Data(format!("{}: row {}: {e}", path.display(), i + 2)))?;
            observations.push(TownObservation::new(
                row.town.trim(),
                row.year,
                row.count,
                row.population,
            )?);
        }
        Dataset::new(
            observations,
            Provenance {
                sources: vec![path.display().to_string()],
                checksum,
            },
        )
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".sha256");
    std::path::PathBuf::from(s)
}

#[derive(Debug, Deserialize)]
struct NormalizedRow {
    town: String,
    year: i32,
    count: u64,
    population: u64,
}

#[derive(Debug, Deserialize)]
struct CountRow {
    town: String,
    year: i32,
    count: u64,
    #[serde(default)]
    category: Option<String>,
}

#[derive(Debug, Deserialize)]
struct PopulationRow {
    town: String,
    year: i32,
    population: u64,
}

/// Loads and inner-joins a counts table and a populations table on
/// (town, year). Rows violating 0 ≤ k ≤ n or n ≥ 1 are dropped with a
/// diagnostic, as are count rows without a matching population. When
/// `crime_category` is given the counts table must carry a `category`
/// column and only matching rows are kept.
pub fn load_csv(
    counts_path: &Path,
    populations_path: &Path,
    crime_category: Option<&str>,
) -> Result<LoadReport> {
    let counts_bytes = fs::read(counts_path)?;
    let population_bytes = fs::read(populations_path)?;

    let mut warnings = Vec::new();

    let mut reader = csv::Reader::from_reader(counts_bytes.as_slice());
    let has_category = reader
        .headers()?
        .iter()
        .any(|h| h.trim().eq_ignore_ascii_case("category"));
    if crime_category.is_some() && !has_category {
        return Err(Error::Data(format!(
            "{}: a crime category was requested but there is no category column",
            counts_path.display()
        )));
    }
    let mut counts: BTreeMap<(String, i32), u64> = BTreeMap::new();
    for (i, row) in reader.deserialize::<CountRow>().enumerate() {
        let line = i + 2; // header is line 1
        let row = row.map_err(|e| {
            Error::Data(format!("{}: row {line}: {e}", counts_path.display()))
        })?;
        if let Some(want) = crime_category {
            match row.category.as_deref().map(str::trim) {
                Some(cat) if cat == want => {}
                _ => continue,
            }
        }
        let key = (row.town.trim().to_string(), row.year);
        if counts.insert(key.clone(), row.count).is_some() {
            return Err(Error::Data(format!(
                "{}: duplicate count for ({}, {})",
                counts_path.display(),
                key.0,
                key.1
            )));
        }
    }

    let mut reader = csv::Reader::from_reader(population_bytes.as_slice());
    let mut populations: BTreeMap<(String, i32), u64> = BTreeMap::new();
    for (i, row) in reader.deserialize::<PopulationRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| {
            Error::Data(format!("{}: row {line}: {e}", populations_path.display()))
        })?;
        let key = (row.town.trim().to_string(), row.year);
        if populations.insert(key.clone(), row.population).is_some() {
            return Err(Error::Data(format!(
                "{}: duplicate population for ({}, {})",
                populations_path.display(),
                key.0,
                key.1
            )));
        }
    }

    let mut observations = Vec::new();
    for ((town, year), count) in &counts {
        let Some(&population) = populations.get(&(town.clone(), *year)) else {
            warnings.push(format!(
                "({town}, {year}): no population record, row dropped"
            ));
            continue;
        };
        match TownObservation::new(town.clone(), *year, *count, population) {
            Ok(obs) => observations.push(obs),
            Err(e) => warnings.push(format!("({town}, {year}): rejected: {e}")),
        }
    }
    if observations.is_empty() {
        return Err(Error::Data(
            "join of counts and populations produced an empty dataset".to_string(),
        ));
    }

    let mut hasher = Sha256::new();
    hasher.update(&counts_bytes);
    hasher.update(&population_bytes);
    let provenance = Provenance {
        sources: vec![
            counts_path.display().to_string(),
            populations_path.display().to_string(),
        ],
        checksum: hex::encode(hasher.finalize()),
    };

    Ok(LoadReport {
        dataset: Dataset::new(observations, provenance)?,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn join_and_reject() {
        let dir = tempfile::tempdir().unwrap();
        let counts = write_file(
            dir.path(),
            "counts.csv",
            "town,year,count\noslo,2016,3570\nnowhere,2016,1\nbadtown,2016,50\n",
        );
        let pops = write_file(
            dir.path(),
            "pop.csv",
            "town,year,population\noslo,2016,658390\nbadtown,2016,10\n",
        );
        let report = load_csv(&counts, &pops, None).unwrap();
        // nowhere has no population; badtown has k > n
        assert_eq!(report.dataset.observations().len(), 1);
        assert_eq!(report.warnings.len(), 2);
        let oslo = &report.dataset.observations()[0];
        assert_eq!(oslo.population(), 658_390);
    }

    #[test]
    fn category_filter() {
        let dir = tempfile::tempdir().unwrap();
        let counts = write_file(
            dir.path(),
            "counts.csv",
            "town,year,category,count\na,2016,violence,5\na,2016,traffic,90\n",
        );
        let pops = write_file(dir.path(), "pop.csv", "town,year,population\na,2016,1000\n");
        let report = load_csv(&counts, &pops, Some("violence")).unwrap();
        assert_eq!(report.dataset.observations().len(), 1);
        assert_eq!(report.dataset.observations()[0].count(), 5);

        // requesting a category without the column is an error
        let plain = write_file(dir.path(), "plain.csv", "town,year,count\na,2016,5\n");
        assert!(load_csv(&plain, &pops, Some("violence")).is_err());
    }

    #[test]
    fn duplicate_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let counts = write_file(
            dir.path(),
            "counts.csv",
            "town,year,count\na,2016,5\na,2016,6\n",
        );
        let pops = write_file(dir.path(), "pop.csv", "town,year,population\na,2016,1000\n");
        assert!(matches!(load_csv(&counts, &pops, None), Err(Error::Data(_))));
    }

    #[test]
    fn parse_error_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let counts = write_file(
            dir.path(),
            "counts.csv",
            "town,year,count\na,2016,5\nb,not_a_year,6\n",
        );
        let pops = write_file(dir.path(), "pop.csv", "town,year,population\na,2016,1000\n");
        let err = load_csv(&counts, &pops, None).unwrap_err();
        assert!(err.to_string().contains("row 3"), "got: {err}");
    }

    #[test]
    fn empty_join_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let counts = write_file(dir.path(), "counts.csv", "town,year,count\na,2016,5\n");
        let pops = write_file(dir.path(), "pop.csv", "town,year,population\nb,2016,1000\n");
        assert!(load_csv(&counts, &pops, None).is_err());
    }

    #[test]
    fn normalized_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let obs = vec![
            TownObservation::new("b", 2016, 2, 200).unwrap(),
            TownObservation::new("a", 2015, 1, 100).unwrap(),
            TownObservation::new("a", 2016, 3, 110).unwrap(),
        ];
        let ds = Dataset::new(obs, Provenance::default()).unwrap();
        let path = dir.path().join("normalized.csv");
        ds.save_normalized(&path).unwrap();
        let loaded = Dataset::load_normalized(&path).unwrap();
        assert_eq!(loaded.observations(), ds.observations());
        assert_eq!(loaded.years(), ds.years());

        // a tampered file fails the checksum
        fs::write(&path, "town,year,count,population\nx,2016,1,10\n").unwrap();
        assert!(Dataset::load_normalized(&path).is_err());
    }

    #[test]
    fn rates_by_year() {
        let obs = vec![
            TownObservation::new("a", 2016, 1, 100).unwrap(),
            TownObservation::new("b", 2016, 5, 100).unwrap(),
        ];
        let ds = Dataset::new(obs, Provenance::default()).unwrap();
        let rates = ds.rates(2016).unwrap();
        assert_eq!(rates.as_slice(), &[0.01, 0.05]);
        assert!(ds.rates(2014).is_err());
    }
}
