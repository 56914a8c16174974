//! Deterministic data behind the built-in skills.
//!
//! A fixture directory holds one file per section. Line-oriented files are
//! UTF-8, tab separated, with `#` comments and blank lines ignored:
//!
//! | file               | columns                                  |
//! |--------------------|------------------------------------------|
//! | `weather.tsv`      | city, date (YYYY-MM-DD), forecast text   |
//! | `stocks.tsv`       | symbol, name, price, currency, as-of     |
//! | `poi.tsv`          | name, category, lat, lon, blurb          |
//! | `translations.tsv` | phrase, target language code, text       |
//! | `locations.tsv`    | location name, city, lat, lon            |
//! | `corpus.jsonl`     | `{"id": …, "text": …}` per line          |
//!
//! Missing files leave their section empty.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use thiserror::Error;

use super::poi::Poi;
use super::retrieval::{Bm25Index, Passage};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{file}:{line}: {reason}")]
    Malformed { file: String, line: usize, reason: String },
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StockQuote {
    pub symbol: String,
    pub name: String,
    pub price: String,
    pub currency: String,
    pub as_of: String,
}

/// A named place from the location pool.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedLocation {
    pub name: String,
    pub city: String,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, Default)]
pub struct FixtureStore {
    pub weather: BTreeMap<(String, NaiveDate), String>,
    pub stocks: BTreeMap<String, StockQuote>,
    pub poi: Vec<Poi>,
    pub translations: BTreeMap<(String, String), String>,
    pub locations: Vec<NamedLocation>,
    pub corpus: Bm25Index,
}

pub(crate) const BUILTIN_WEATHER: &str = include_str!("../../fixtures/weather.tsv");
pub(crate) const BUILTIN_STOCKS: &str = include_str!("../../fixtures/stocks.tsv");
pub(crate) const BUILTIN_POI: &str = include_str!("../../fixtures/poi.tsv");
pub(crate) const BUILTIN_TRANSLATIONS: &str = include_str!("../../fixtures/translations.tsv");
pub(crate) const BUILTIN_LOCATIONS: &str = include_str!("../../fixtures/locations.tsv");
pub(crate) const BUILTIN_CORPUS: &str = include_str!("../../fixtures/corpus.jsonl");

/// Non-comment, non-blank lines split on tabs, with 1-based line numbers.
pub(crate) fn tsv_rows(src: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    src.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim_end_matches('\r');
        (!l.trim().is_empty() && !l.trim_start().starts_with('#')).then(|| (i + 1, l.split('\t').collect()))
    })
}

fn malformed(file: &str, line: usize, reason: impl Into<String>) -> FixtureError {
    FixtureError::Malformed { file: file.to_string(), line, reason: reason.into() }
}

fn expect_cols<'a>(file: &str, line: usize, cols: Vec<&'a str>, n: usize) -> Result<Vec<&'a str>, FixtureError> {
    if cols.len() != n {
        return Err(malformed(file, line, format!("expected {n} columns, found {}", cols.len())));
    }
    Ok(cols)
}

fn coord(file: &str, line: usize, raw: &str, max: f64) -> Result<f64, FixtureError> {
    let v: f64 = raw.trim().parse().map_err(|_| malformed(file, line, format!("bad coordinate {raw:?}")))?;
    if !(-max..=max).contains(&v) {
        return Err(malformed(file, line, format!("coordinate {v} out of range")));
    }
    Ok(v)
}

impl FixtureStore {
    /// The fixtures shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_sources(&Sources {
            weather: BUILTIN_WEATHER,
            stocks: BUILTIN_STOCKS,
            poi: BUILTIN_POI,
            translations: BUILTIN_TRANSLATIONS,
            locations: BUILTIN_LOCATIONS,
            corpus: BUILTIN_CORPUS,
        })
        .expect("builtin fixtures are well-formed")
    }

    pub fn load_dir(dir: &Path) -> Result<Self, FixtureError> {
        let read = |name: &str| -> Result<String, FixtureError> {
            let path = dir.join(name);
            match fs::read_to_string(&path) {
                Ok(s) => Ok(s),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(String::new()),
                Err(source) => Err(FixtureError::Io { path, source }),
            }
        };
        let (weather, stocks, poi, translations, locations, corpus) = (
            read("weather.tsv")?,
            read("stocks.tsv")?,
            read("poi.tsv")?,
            read("translations.tsv")?,
            read("locations.tsv")?,
            read("corpus.jsonl")?,
        );
        Self::from_sources(&Sources {
            weather: &weather,
            stocks: &stocks,
            poi: &poi,
            translations: &translations,
            locations: &locations,
            corpus: &corpus,
        })
    }

    pub fn from_sources(src: &Sources<'_>) -> Result<Self, FixtureError> {
        let mut store = FixtureStore::default();
        for (line, cols) in tsv_rows(src.weather) {
            let c = expect_cols("weather.tsv", line, cols, 3)?;
            let date = NaiveDate::parse_from_str(c[1].trim(), "%Y-%m-%d")
                .map_err(|_| malformed("weather.tsv", line, format!("bad date {:?}", c[1])))?;
            store.weather.insert((c[0].trim().to_string(), date), c[2].to_string());
        }
        for (line, cols) in tsv_rows(src.stocks) {
            let c = expect_cols("stocks.tsv", line, cols, 5)?;
            let q = StockQuote {
                symbol: c[0].trim().to_string(),
                name: c[1].trim().to_string(),
                price: c[2].trim().to_string(),
                currency: c[3].trim().to_string(),
                as_of: c[4].trim().to_string(),
            };
            store.stocks.insert(q.symbol.clone(), q);
        }
        for (line, cols) in tsv_rows(src.poi) {
            let c = expect_cols("poi.tsv", line, cols, 5)?;
            store.poi.push(Poi {
                name: c[0].trim().to_string(),
                category: c[1].trim().to_string(),
                latitude: coord("poi.tsv", line, c[2], 90.0)?,
                longitude: coord("poi.tsv", line, c[3], 180.0)?,
                blurb: c[4].trim().to_string(),
            });
        }
        for (line, cols) in tsv_rows(src.translations) {
            let c = expect_cols("translations.tsv", line, cols, 3)?;
            store.translations.insert((c[0].trim().to_lowercase(), c[1].trim().to_lowercase()), c[2].to_string());
        }
        for (line, cols) in tsv_rows(src.locations) {
            let c = expect_cols("locations.tsv", line, cols, 4)?;
            store.locations.push(NamedLocation {
                name: c[0].trim().to_string(),
                city: c[1].trim().to_string(),
                latitude: coord("locations.tsv", line, c[2], 90.0)?,
                longitude: coord("locations.tsv", line, c[3], 180.0)?,
            });
        }
        let mut passages = Vec::new();
        for (i, l) in src.corpus.lines().enumerate() {
            if l.trim().is_empty() {
                continue;
            }
            let p: Passage = serde_json::from_str(l).map_err(|e| malformed("corpus.jsonl", i + 1, e.to_string()))?;
            passages.push(p);
        }
        store.corpus = Bm25Index::new(passages);
        Ok(store)
    }

    /// Weather city for a location: a fixture city named in the location
    /// string, else the city of the nearest pool location.
    pub fn resolve_city(&self, location_name: &str, lat: f64, lon: f64) -> Option<String> {
        let lower = location_name.to_lowercase();
        let mut cities: Vec<&str> = self.weather.keys().map(|(c, _)| c.as_str()).collect();
        cities.dedup();
        if let Some(c) = cities.iter().filter(|c| lower.contains(&c.to_lowercase())).max_by_key(|c| c.len()) {
            return Some(c.to_string());
        }
        self.locations
            .iter()
            .map(|l| (l, super::poi::haversine_km(lat, lon, l.latitude, l.longitude)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(l, _)| l.city.clone())
    }
}

/// Raw section texts, one per fixture file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sources<'a> {
    pub weather: &'a str,
    pub stocks: &'a str,
    pub poi: &'a str,
    pub translations: &'a str,
    pub locations: &'a str,
    pub corpus: &'a str,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_loads() {
        let s = FixtureStore::builtin();
        let d = NaiveDate::from_ymd_opt(2022, 8, 12).unwrap();
        assert!(s.weather[&("Beijing".to_string(), d)].contains("18度～26度"));
        assert!(!s.poi.is_empty());
        assert!(s.corpus.len() >= 20);
        assert!(s.locations.len() >= 10);
    }

    #[test]
    fn malformed_line_reports_position() {
        let src = Sources { weather: "# c\nBeijing\t2022-08-12\n", ..Default::default() };
        match FixtureStore::from_sources(&src) {
            Err(FixtureError::Malformed { file, line, .. }) => {
                assert_eq!(file, "weather.tsv");
                assert_eq!(line, 2);
            }
            other => panic!("{other:?}"),
        }
        let src = Sources { poi: "x\tcafe\t91\t0\tb\n", ..Default::default() };
        assert!(FixtureStore::from_sources(&src).is_err());
    }

    #[test]
    fn city_resolution() {
        let s = FixtureStore::builtin();
        assert_eq!(s.resolve_city("Haidian district, Beijing", 0.0, 0.0).as_deref(), Some("Beijing"));
        // no name match: nearest pool entry (Shanghai coordinates)
        assert_eq!(s.resolve_city("somewhere", 31.23, 121.47).as_deref(), Some("Shanghai"));
    }
}
