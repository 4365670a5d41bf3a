//! Binary click data: per user, the set of items clicked at least once.

use crate::error::{BmcdError, Result};

/// One user's clicked items, sorted and deduplicated. Always nonempty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClickSet {
    items: Vec<u32>,
}

impl ClickSet {
    pub fn new(mut items: Vec<u32>) -> Result<Self> {
        if items.is_empty() {
            return Err(BmcdError::EmptyInput("user with no clicks".into()));
        }
        items.sort_unstable();
        items.dedup();
        Ok(ClickSet { items })
    }

    /// Number of clicked items, `c_j`.
    pub fn count(&self) -> usize {
        self.items.len()
    }

    /// Sorted clicked item indices.
    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn contains(&self, item: u32) -> bool {
        self.items.binary_search(&item).is_ok()
    }
}

/// A click dataset over a fixed item universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClickData {
    n_items: usize,
    users: Vec<ClickSet>,
}

impl ClickData {
    pub fn new(n_items: usize, users: Vec<ClickSet>) -> Result<Self> {
        if n_items == 0 {
            return Err(BmcdError::invalid("n_items", "must be >= 1"));
        }
        for (j, u) in users.iter().enumerate() {
            if let Some(&max) = u.items().last() {
                if max as usize >= n_items {
                    return Err(BmcdError::invalid(
                        "users",
                        format!("user {j} clicks item {max} >= n_items {n_items}"),
                    ));
                }
            }
            if u.count() > n_items {
                return Err(BmcdError::invalid(
                    "users",
                    format!("user {j} has more clicks than items"),
                ));
            }
        }
        Ok(ClickData { n_items, users })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn users(&self) -> &[ClickSet] {
        &self.users
    }

    pub fn user(&self, j: usize) -> &ClickSet {
        &self.users[j]
    }

    /// Click count per item across all users.
    pub fn item_click_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_items];
        for u in &self.users {
            for &i in u.items() {
                counts[i as usize] += 1;
            }
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn click_set_sorts_and_dedups() {
        let c = ClickSet::new(vec![3, 1, 3, 2]).unwrap();
        assert_eq!(c.items(), &[1, 2, 3]);
        assert_eq!(c.count(), 3);
        assert!(c.contains(2));
        assert!(!c.contains(4));
    }

    #[test]
    fn empty_user_rejected() {
        assert!(ClickSet::new(vec![]).is_err());
    }

    #[test]
    fn out_of_universe_click_rejected() {
        let users = vec![ClickSet::new(vec![0, 5]).unwrap()];
        assert!(ClickData::new(5, users).is_err());
    }

    #[test]
    fn item_counts_accumulate() {
        let users = vec![
            ClickSet::new(vec![0, 1]).unwrap(),
            ClickSet::new(vec![1, 2]).unwrap(),
        ];
        let data = ClickData::new(4, users).unwrap();
        assert_eq!(data.item_click_counts(), vec![1, 2, 1, 0]);
    }
}
