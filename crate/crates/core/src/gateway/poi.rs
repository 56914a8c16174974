//! Location-based recommendation: filter points of interest by category and
//! rank by great-circle distance from the requester.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::types::SpatiotemporalState;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub name: String,
    pub category: String,
    pub latitude: f64,
    pub longitude: f64,
    pub blurb: String,
}

/// Haversine distance in kilometres.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = (lat2 - lat1).to_radians();
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// POIs of `category` (case-insensitive) ordered nearest first, ties by name.
pub fn rank_by_distance<'a>(pois: &'a [Poi], state: &SpatiotemporalState, category: &str) -> Vec<(&'a Poi, f64)> {
    let cat = category.to_lowercase();
    let mut hits: Vec<(&Poi, f64)> = pois
        .iter()
        .filter(|p| p.category.to_lowercase() == cat)
        .map(|p| (p, haversine_km(state.latitude, state.longitude, p.latitude, p.longitude)))
        .collect();
    hits.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then_with(|| a.0.name.cmp(&b.0.name)));
    hits
}

/// Formats the top `k` matches; `None` when nothing matches the category.
pub fn recommend_poi(pois: &[Poi], state: &SpatiotemporalState, category: &str, k: usize) -> Option<String> {
    let ranked = rank_by_distance(pois, state, category);
    if ranked.is_empty() || k == 0 {
        return None;
    }
    let lines: Vec<String> = ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, (p, d))| format!("{}. {} ({:.1} km): {}", i + 1, p.name, d, p.blurb))
        .collect();
    Some(format!("Nearby {} near {}: {}", category, state.location_name, lines.join(" ")))
}

/// The POI category named in `query`, preferring the longest match.
pub fn category_in_query<'a>(pois: &'a [Poi], query: &str) -> Option<&'a str> {
    let q = query.to_lowercase();
    pois.iter().map(|p| p.category.as_str()).filter(|c| q.contains(&c.to_lowercase())).max_by_key(|c| c.chars().count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::parse_time;

    fn poi(name: &str, cat: &str, lat: f64, lon: f64) -> Poi {
        Poi { name: name.into(), category: cat.into(), latitude: lat, longitude: lon, blurb: "b".into() }
    }

    fn here() -> SpatiotemporalState {
        SpatiotemporalState::new(parse_time("2022-08-12T15:00+08:00").unwrap(), 39.99, 116.30, "Haidian")
    }

    #[test]
    fn zero_distance_ranks_first() {
        let pois = vec![poi("far", "cafe", 40.10, 116.40), poi("here", "cafe", 39.99, 116.30)];
        let out = recommend_poi(&pois, &here(), "cafe", 2).unwrap();
        assert!(out.contains("1. here (0.0 km)"), "{out}");
    }

    #[test]
    fn one_degree_of_latitude() {
        // pi * R / 180
        let d = haversine_km(0.0, 0.0, 1.0, 0.0);
        assert!((d - 111.194_926_644_558_7).abs() < 1e-9);
    }

    #[test]
    fn missing_category() {
        let pois = vec![poi("x", "cafe", 0.0, 0.0)];
        assert_eq!(recommend_poi(&pois, &here(), "museum", 3), None);
    }

    #[test]
    fn longest_category_wins() {
        let pois = vec![poi("a", "restaurant", 0.0, 0.0), poi("b", "western restaurant", 0.0, 0.0)];
        assert_eq!(category_in_query(&pois, "nearby western restaurants"), Some("western restaurant"));
    }
}
