//! Change policy: compare the latest observation with the one before it.

use super::model::{Observation, RelativeChange};

/// `(current − previous) / previous`; growth from zero is `+∞`, zero to zero is 0.
pub fn relative_change(previous: f64, current: f64) -> RelativeChange {
    if previous == 0.0 {
        RelativeChange(if current > 0.0 { f64::INFINITY } else { 0.0 })
    } else {
        RelativeChange((current - previous) / previous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeEvent<'a> {
    pub previous: &'a Observation,
    pub current: &'a Observation,
    pub relative_change: RelativeChange,
}

/// Fires when the last two observations differ by at least `threshold`
/// in relative terms, in either direction.
pub fn evaluate_change(timeline: &[Observation], threshold: f64) -> Option<ChangeEvent<'_>> {
    let [.., previous, current] = timeline else {
        return None;
    };
    let rc = relative_change(previous.waste_area_m2, current.waste_area_m2);
    (rc.0.abs() >= threshold).then_some(ChangeEvent {
        previous,
        current,
        relative_change: rc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone, Utc};

    fn timeline(areas: &[f64]) -> Vec<Observation> {
        let t0 = Utc.with_ymd_and_hms(2021, 6, 1, 10, 0, 0).unwrap();
        areas
            .iter()
            .enumerate()
            .map(|(i, &a)| Observation {
                aoi_id: "a".into(),
                scene_id: format!("s{i}"),
                acquired_at: t0 + Duration::days(i as i64),
                waste_area_m2: a,
                waste_fraction: 0.0,
                report_path: "r".into(),
            })
            .collect()
    }

    #[test]
    fn policy_examples() {
        assert!(evaluate_change(&timeline(&[]), 0.2).is_none());
        assert!(evaluate_change(&timeline(&[1000.0]), 0.2).is_none());

        let t = timeline(&[0.0, 500.0]);
        let e = evaluate_change(&t, 0.2).unwrap();
        assert_eq!(e.relative_change.0, f64::INFINITY);

        let t = timeline(&[1000.0, 800.0]);
        let e = evaluate_change(&t, 0.2).unwrap();
        assert_eq!(e.relative_change.0, -0.2);

        let t = timeline(&[1020.0, 1400.0]);
        let e = evaluate_change(&t, 0.2).unwrap();
        assert!((e.relative_change.0 - 0.3725490196).abs() < 1e-9);
        assert_eq!(e.current.scene_id, "s1");

        assert!(evaluate_change(&timeline(&[1000.0, 1050.0]), 0.2).is_none());
        assert!(evaluate_change(&timeline(&[0.0, 0.0]), 0.2).is_none());
    }
}
