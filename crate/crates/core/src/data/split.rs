use chrono::Datelike;

use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitName {
    Train,
    Val,
    TestAugust,
    TestRecent,
}

impl SplitName {
    /// Split owning a timestamp, or `None` outside 1980–2023.
    ///
    /// Augusts of 1980–2019 are held out for testing; the remaining months
    /// train (1980–2009) or validate (2010–2019); 2020–2023 form a second,
    /// all-months test set.
    pub fn of(t: &Timestamp) -> Option<SplitName> {
        match t.year() {
            1980..=2019 if t.month() == 8 => Some(SplitName::TestAugust),
            1980..=2009 => Some(SplitName::Train),
            2010..=2019 => Some(SplitName::Val),
            2020..=2023 => Some(SplitName::TestRecent),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::TestAugust => "test_august",
            SplitName::TestRecent => "test_recent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test_august: Vec<T>,
    pub test_recent: Vec<T>,
    /// Items dated outside 1980–2023.
    pub outside: Vec<T>,
}

/// Partitions items by the date returned from `when`.
pub fn split_dataset<T, F: Fn(&T) -> Timestamp>(items: Vec<T>, when: F) -> DatasetSplit<T> {
    let mut out = DatasetSplit { train: vec![], val: vec![], test_august: vec![], test_recent: vec![], outside: vec![] };
    for it in items {
        match SplitName::of(&when(&it)) {
            Some(SplitName::Train) => out.train.push(it),
            Some(SplitName::Val) => out.val.push(it),
            Some(SplitName::TestAugust) => out.test_august.push(it),
            Some(SplitName::TestRecent) => out.test_recent.push(it),
            None => out.outside.push(it),
        }
    }
    out
}
