use classifieds_core::search::location_boost;
use classifieds_core::GeoPoint;
use classifieds_service::ServiceConfig;

use crate::oracle::{boost, distance_km, DECAY_KM, EARTH_RADIUS_KM};

pub fn run() -> String {
    let decay = ServiceConfig::new("data", "schemas", "networks.tsv").ranking().decay_km;
    assert_eq!(decay, DECAY_KM, "default decay distance");

    let baltimore = GeoPoint::new(39.2904, -76.6122).unwrap();
    let washington = GeoPoint::new(38.9072, -77.0369).unwrap();
    assert_eq!(location_boost(Some(baltimore), Some(baltimore), decay), 1.0, "boost at zero distance");

    // Due north in 0.5 km steps out to 200 km.
    let km_per_degree = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
    let mut previous = f64::INFINITY;
    for step in 0..=400 {
        let d = step as f64 * 0.5;
        let p = GeoPoint::new(baltimore.lat + d / km_per_degree, baltimore.lon).unwrap();
        let b = location_boost(Some(baltimore), Some(p), decay);
        assert!(b < previous, "boost not strictly decreasing at {d} km: {b} >= {previous}");
        assert!((b - boost(d)).abs() <= 1e-6, "boost at {d} km: {b} vs {}", boost(d));
        previous = b;
    }

    let d = distance_km(baltimore, washington);
    let got = location_boost(Some(baltimore), Some(washington), decay);
    let want = boost(d);
    assert!((got - want).abs() <= 1e-6, "Baltimore to Washington: {got} vs {want}");
    assert_eq!(location_boost(None, Some(washington), decay), 0.0);
    format!("boost(0)=1, strictly decreasing over 401 points to 200 km, Baltimore-DC {d:.3} km gives {got:.6}")
}
