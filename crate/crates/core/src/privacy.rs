//! Location obfuscation: donut geomasking, planar-Laplace perturbation and
//! two-radius filtering of LBS results.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PrivacyError {
    #[error("donut radii must satisfy 0 < inner < outer (got {inner}, {outer})")]
    BadRadii { inner: f64, outer: f64 },
    #[error("epsilon must be positive and finite (got {0})")]
    BadEpsilon(f64),
    #[error("search radius {search} does not cover true radius {needed}")]
    RadiusViolation { search: f64, needed: f64 },
    #[error("non-finite coordinate")]
    NonFinite,
}

/// A point in a local planar frame, in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub x: f64,
    pub y: f64,
}

impl GeoPoint {
    pub fn new(x: f64, y: f64) -> Result<Self, PrivacyError> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(PrivacyError::NonFinite);
        }
        Ok(GeoPoint { x, y })
    }

    pub fn distance(&self, other: &GeoPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn offset(&self, r: f64, theta: f64) -> GeoPoint {
        GeoPoint { x: self.x + r * theta.cos(), y: self.y + r * theta.sin() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrivacyLevel {
    High,
    Low,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Geomask,
    Geoind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrivacyPolicy {
    pub level: PrivacyLevel,
    /// Per meter.
    pub geoind_epsilon: f64,
    pub donut_inner: f64,
    pub donut_outer: f64,
}

impl Default for PrivacyPolicy {
    fn default() -> Self {
        PrivacyPolicy { level: PrivacyLevel::Low, geoind_epsilon: 0.01, donut_inner: 100.0, donut_outer: 300.0 }
    }
}

impl PrivacyPolicy {
    pub fn validate(&self) -> Result<(), PrivacyError> {
        check_epsilon(self.geoind_epsilon)?;
        check_radii(self.donut_inner, self.donut_outer)
    }

    /// Obfuscates `loc` with whichever mechanism the policy selects.
    pub fn obfuscate<R: Rng + ?Sized>(
        &self,
        loc: GeoPoint,
        needs_exact: bool,
        rng: &mut R,
    ) -> Result<(Mechanism, GeoPoint), PrivacyError> {
        let m = choose_mechanism(self, needs_exact);
        let p = match m {
            Mechanism::Geomask => geomask_donut(loc, self.donut_inner, self.donut_outer, rng)?,
            Mechanism::Geoind => geoind_perturb(loc, self.geoind_epsilon, rng)?,
        };
        Ok((m, p))
    }
}

fn check_radii(inner: f64, outer: f64) -> Result<(), PrivacyError> {
    if inner > 0.0 && inner < outer && outer.is_finite() {
        Ok(())
    } else {
        Err(PrivacyError::BadRadii { inner, outer })
    }
}

fn check_epsilon(eps: f64) -> Result<(), PrivacyError> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(PrivacyError::BadEpsilon(eps))
    }
}

/// Displaces `loc` uniformly (by area) into the annulus `inner..=outer`.
pub fn geomask_donut<R: Rng + ?Sized>(loc: GeoPoint, inner: f64, outer: f64, rng: &mut R) -> Result<GeoPoint, PrivacyError> {
    check_radii(inner, outer)?;
    let u: f64 = rng.gen();
    let r = (u * (outer * outer - inner * inner) + inner * inner).sqrt().clamp(inner, outer);
    Ok(loc.offset(r, rng.gen::<f64>() * TAU))
}

/// Mean displacement of a uniform-by-area annulus sample.
pub fn annulus_mean(inner: f64, outer: f64) -> f64 {
    2.0 * (outer.powi(3) - inner.powi(3)) / (3.0 * (outer * outer - inner * inner))
}

/// P[d <= r] for the planar Laplace law.
pub fn planar_laplace_cdf(epsilon: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    1.0 - (1.0 + epsilon * r) * (-epsilon * r).exp()
}

/// Inverts the radial CDF by bisection to 1e-9 m.
pub fn planar_laplace_radius(epsilon: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0 / epsilon;
    while planar_laplace_cdf(epsilon, hi) < p {
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::MAX;
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if planar_laplace_cdf(epsilon, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Planar-Laplace perturbation with privacy parameter `epsilon` (per meter).
pub fn geoind_perturb<R: Rng + ?Sized>(loc: GeoPoint, epsilon: f64, rng: &mut R) -> Result<GeoPoint, PrivacyError> {
    check_epsilon(epsilon)?;
    let theta = rng.gen::<f64>() * TAU;
    // gen() is in [0,1); keep p strictly below 1 so the radius stays finite.
    let p: f64 = rng.gen();
    let r = planar_laplace_radius(epsilon, p);
    Ok(loc.offset(r, theta))
}

/// High privacy masks with a donut unless exact-position utility is needed.
pub fn choose_mechanism(policy: &PrivacyPolicy, needs_exact: bool) -> Mechanism {
    match (policy.level, needs_exact) {
        (PrivacyLevel::High, false) => Mechanism::Geomask,
        _ => Mechanism::Geoind,
    }
}

/// What actually leaves the device: the reported point and the enlarged radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbsRequest {
    pub reported: GeoPoint,
    pub search_radius: f64,
}

/// Client-side query state; `true_radius` and the true location stay local.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbsQuery {
    pub reported: GeoPoint,
    pub search_radius: f64,
    pub true_radius: f64,
}

impl LbsQuery {
    /// Builds a query whose search circle covers the true-radius circle.
    pub fn around(true_loc: GeoPoint, reported: GeoPoint, true_radius: f64) -> Self {
        LbsQuery { reported, search_radius: reported.distance(&true_loc) + true_radius, true_radius }
    }

    pub fn check(&self, true_loc: &GeoPoint) -> Result<(), PrivacyError> {
        let needed = self.reported.distance(true_loc) + self.true_radius;
        // Tolerate rounding in the distance computation.
        if self.search_radius + 1e-9 * needed.max(1.0) < needed {
            return Err(PrivacyError::RadiusViolation { search: self.search_radius, needed });
        }
        Ok(())
    }

    pub fn request(&self) -> LbsRequest {
        LbsRequest { reported: self.reported, search_radius: self.search_radius }
    }
}

/// Items an LBS returns for a request: everything inside the search circle.
pub fn lbs_answer<T: Clone>(request: &LbsRequest, items: &[(GeoPoint, T)]) -> Vec<(GeoPoint, T)> {
    items.iter().filter(|(p, _)| p.distance(&request.reported) <= request.search_radius).cloned().collect()
}

/// Keeps the results inside the true-radius circle around the true location.
pub fn filter_results<T: Clone>(
    query: &LbsQuery,
    results: &[(GeoPoint, T)],
    true_loc: &GeoPoint,
) -> Result<Vec<(GeoPoint, T)>, PrivacyError> {
    query.check(true_loc)?;
    Ok(results.iter().filter(|(p, _)| p.distance(true_loc) <= query.true_radius).cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bad_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let o = GeoPoint::default();
        assert!(matches!(geomask_donut(o, 100.0, 100.0, &mut rng), Err(PrivacyError::BadRadii { .. })));
        assert!(matches!(geomask_donut(o, 0.0, 100.0, &mut rng), Err(PrivacyError::BadRadii { .. })));
        assert_eq!(geoind_perturb(o, 0.0, &mut rng), Err(PrivacyError::BadEpsilon(0.0)));
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn inversion_matches_closed_form() {
        // 1 - 2/e at eps*r = 1.
        assert!((planar_laplace_cdf(0.01, 100.0) - (1.0 - 2.0 * (-1.0f64).exp())).abs() < 1e-12);
        let r = planar_laplace_radius(0.05, 0.5);
        assert!((planar_laplace_cdf(0.05, r) - 0.5).abs() < 1e-9);
        assert!((r - 33.57).abs() / 33.57 < 0.001, "{r}");
    }

    #[test]
    fn mechanism_table() {
        let mut p = PrivacyPolicy { level: PrivacyLevel::High, ..Default::default() };
        assert_eq!(choose_mechanism(&p, false), Mechanism::Geomask);
        assert_eq!(choose_mechanism(&p, true), Mechanism::Geoind);
        p.level = PrivacyLevel::Low;
        assert_eq!(choose_mechanism(&p, true), Mechanism::Geoind);
        assert_eq!(choose_mechanism(&p, false), Mechanism::Geoind);
    }

    #[test]
    fn filter_examples() {
        let t = GeoPoint::default();
        let items: Vec<_> =
            [50.0, 150.0, 400.0].iter().enumerate().map(|(i, d)| (GeoPoint { x: *d, y: 0.0 }, i)).collect();
        let q = LbsQuery::around(t, GeoPoint { x: -30.0, y: 40.0 }, 200.0);
        let kept = filter_results(&q, &items, &t).unwrap();
        assert_eq!(kept.iter().map(|(_, i)| *i).collect::<Vec<_>>(), vec![0, 1]);
        let q2 = LbsQuery::around(t, t, 10.0);
        assert!(filter_results(&q2, &items, &t).unwrap().is_empty());
        let bad = LbsQuery { reported: GeoPoint { x: 100.0, y: 0.0 }, search_radius: 150.0, true_radius: 200.0 };
        assert!(matches!(filter_results(&bad, &items, &t), Err(PrivacyError::RadiusViolation { .. })));
    }

    #[test]
    fn request_omits_true_location() {
        let t = GeoPoint { x: 1234.5678, y: -8765.4321 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rep = geoind_perturb(t, 0.01, &mut rng).unwrap();
        let js = serde_json::to_string(&LbsQuery::around(t, rep, 200.0).request()).unwrap();
        assert!(!js.contains("1234.5678") && !js.contains("8765.4321"));
        assert!(!js.contains("true_radius"));
    }
}
