use serde::{Deserialize, Serialize};

/// Identity of a cost cell across cycles: the lane the path ends in plus the
/// profile index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Selection {
    pub target_lane: String,
    pub h: usize,
}

/// Commits a new selection only after the committed one has been beaten
/// by a strictly lower-risk argmin for `hold` seconds without interruption.
/// The argmin may move between cells meanwhile; the switch goes to the
/// argmin of the cycle in which the hold expires.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HysteresisState {
    committed: Option<Selection>,
    beaten_since: Option<f64>,
}

impl HysteresisState {
    pub fn committed(&self) -> Option<&Selection> {
        self.committed.as_ref()
    }

    /// Time since which the committed selection has been beaten, if it is.
    pub fn beaten_since(&self) -> Option<f64> {
        self.beaten_since
    }

    /// Feeds this cycle's argmin. `committed_risk` is the committed
    /// selection's risk in this cycle's table, `None` if it no longer
    /// exists, in which case `new` is committed at once. Returns the
    /// committed selection and whether it changed.
    pub fn step(
        &mut self,
        new: Selection,
        new_risk: f64,
        committed_risk: Option<f64>,
        now: f64,
        hold: f64,
    ) -> (Selection, bool) {
        let current = match (&self.committed, committed_risk) {
            (Some(c), Some(_)) => c.clone(),
            _ => {
                self.committed = Some(new.clone());
                self.beaten_since = None;
                return (new, true);
            }
        };
        let beaten = new != current && committed_risk.is_some_and(|r| new_risk < r);
        if !beaten {
            self.beaten_since = None;
            return (current, false);
        }
        let since = *self.beaten_since.get_or_insert(now);
        if now - since >= hold - 1e-9 {
            self.committed = Some(new.clone());
            self.beaten_since = None;
            (new, true)
        } else {
            (current, false)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sel(lane: &str, h: usize) -> Selection {
        Selection {
            target_lane: lane.into(),
            h,
        }
    }

    #[test]
    fn first_output_commits_immediately() {
        let mut st = HysteresisState::default();
        let (s, switched) = st.step(sel("A", 3), 0.5, None, 0.0, 2.0);
        assert_eq!(s, sel("A", 3));
        assert!(switched);
    }

    #[test]
    fn alternating_argmin_never_commits() {
        let mut st = HysteresisState::default();
        st.step(sel("A", 1), 0.5, None, 0.0, 2.0);
        let mut switches = 0;
        for k in 1..300 {
            let now = k as f64 * 0.1;
            let new = if k % 2 == 0 { sel("A", 1) } else { sel("B", 2) };
            let (_, sw) = st.step(new, 0.1, Some(0.5), now, 2.0);
            switches += sw as usize;
        }
        assert_eq!(switches, 0);
    }

    #[test]
    fn persistent_improvement_switches_at_hold() {
        let mut st = HysteresisState::default();
        st.step(sel("A", 1), 0.5, None, 0.0, 2.0);
        let mut switched_at = None;
        for k in 10..=31 {
            let now = k as f64 * 0.1;
            let (_, sw) = st.step(sel("B", 2), 0.1, Some(0.5), now, 2.0);
            if sw {
                assert!(switched_at.is_none());
                switched_at = Some(now);
            }
        }
        // first seen at 1.0 s, committed at the 2.0 s mark
        assert!((switched_at.unwrap() - 3.0).abs() < 1e-9);
        assert_eq!(st.committed(), Some(&sel("B", 2)));
    }

    #[test]
    fn higher_risk_candidate_never_commits() {
        let mut st = HysteresisState::default();
        st.step(sel("A", 1), 0.1, None, 0.0, 2.0);
        for k in 1..100 {
            let (s, sw) = st.step(sel("B", 2), 0.2, Some(0.1), k as f64 * 0.1, 2.0);
            assert!(!sw);
            assert_eq!(s, sel("A", 1));
        }
    }

    #[test]
    fn vanished_selection_is_replaced() {
        let mut st = HysteresisState::default();
        st.step(sel("A", 1), 0.1, None, 0.0, 2.0);
        let (s, sw) = st.step(sel("B", 2), 0.3, None, 0.1, 2.0);
        assert!(sw);
        assert_eq!(s, sel("B", 2));
    }

    #[test]
    fn wandering_argmin_still_commits() {
        let mut st = HysteresisState::default();
        st.step(sel("A", 1), 0.5, None, 0.0, 2.0);
        let mut last = None;
        for k in 1..=21 {
            let new = sel("B", 2 + k % 3);
            let (s, sw) = st.step(new.clone(), 0.1, Some(0.5), k as f64 * 0.1, 2.0);
            assert_eq!(sw, k == 21);
            last = Some((s, new));
        }
        let (s, new) = last.unwrap();
        assert_eq!(s, new);
    }

    #[test]
    fn interruption_restarts_the_clock() {
        let mut st = HysteresisState::default();
        st.step(sel("A", 1), 0.5, None, 0.0, 2.0);
        for k in 1..=15 {
            st.step(sel("B", 2), 0.1, Some(0.5), k as f64 * 0.1, 2.0);
        }
        st.step(sel("A", 1), 0.5, Some(0.5), 1.6, 2.0);
        for k in 17..=36 {
            let (_, sw) = st.step(sel("B", 2), 0.1, Some(0.5), k as f64 * 0.1, 2.0);
            assert!(!sw, "switched at {k}");
        }
        let (_, sw) = st.step(sel("B", 2), 0.1, Some(0.5), 3.7, 2.0);
        assert!(sw);
    }
}
