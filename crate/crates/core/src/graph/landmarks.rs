use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub index: usize,
    pub x: f64,
    pub y: f64,
}

/// Index-aligned landmark coordinates: point `i` has `index == i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    points: Vec<Landmark>,
}

impl LandmarkSet {
    /// Builds a set from coordinates in index order.
    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("landmark set must not be empty"));
        }
        let points = coords
            .iter()
            .enumerate()
            .map(|(index, &(x, y))| {
                if !x.is_finite() || !y.is_finite() {
                    return Err(Error::invalid(format!(
                        "landmark {index} has non-finite coordinates"
                    )));
                }
                Ok(Landmark { index, x, y })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points })
    }

    /// Like [`from_coords`](Self::from_coords) but additionally requires the
    /// normalized range `[0, 1]` on both axes.
    pub fn normalized(coords: &[(f64, f64)]) -> Result<Self> {
        let set = Self::from_coords(coords)?;
        if let Some(p) = set
            .points
            .iter()
            .find(|p| !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y))
        {
            return Err(Error::invalid(format!(
                "landmark {} at ({}, {}) is outside [0,1]",
                p.index, p.x, p.y
            )));
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Landmark] {
        &self.points
    }

    pub fn get(&self, index: usize) -> Option<&Landmark> {
        self.points.get(index)
    }

    pub fn coords(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().map(|p| (p.x, p.y))
    }
}

/// Index of the geometric medoid: the landmark minimizing the summed Euclidean
/// distance to all others. Ties go to the smallest index.
pub fn medoid_root(landmarks: &LandmarkSet) -> Result<usize> {
    if landmarks.is_empty() {
        return Err(Error::invalid("medoid of an empty landmark set"));
    }
    let pts = landmarks.points();
    let mut best = (0, f64::INFINITY);
    for a in pts {
        let total: f64 = pts
            .iter()
            .map(|b| (a.x - b.x).hypot(a.y - b.y))
            .sum();
        if total < best.1 {
            best = (a.index, total);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medoid_of_collinear_points_is_middle() {
        let set = LandmarkSet::from_coords(&[(0.0, 0.3), (1.0, 0.3), (0.5, 0.3)]).unwrap();
        assert_eq!(medoid_root(&set).unwrap(), 2);
    }

    #[test]
    fn medoid_single_point() {
        let set = LandmarkSet::from_coords(&[(0.4, 0.4)]).unwrap();
        assert_eq!(medoid_root(&set).unwrap(), 0);
    }

    #[test]
    fn medoid_square_with_center() {
        let set = LandmarkSet::from_coords(&[
            (0.0, 0.0),
            (1.0, 0.0),
            (0.0, 1.0),
            (1.0, 1.0),
            (0.5, 0.5),
        ])
        .unwrap();
        assert_eq!(medoid_root(&set).unwrap(), 4);
    }

    #[test]
    fn medoid_ties_take_smallest_index() {
        let set = LandmarkSet::from_coords(&[(0.0, 0.0), (1.0, 0.0)]).unwrap();
        assert_eq!(medoid_root(&set).unwrap(), 0);
    }

    #[test]
    fn empty_set_rejected() {
        assert!(LandmarkSet::from_coords(&[]).is_err());
    }

    #[test]
    fn normalized_range_enforced() {
        assert!(LandmarkSet::normalized(&[(0.0, 1.2)]).is_err());
        assert!(LandmarkSet::normalized(&[(0.0, 1.0)]).is_ok());
    }
}
