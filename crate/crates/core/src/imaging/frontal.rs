/// Anything that carries a DICOM view position.
pub trait ViewPositioned {
    fn view_position(&self) -> Option<&str>;
}

impl ViewPositioned for String {
    fn view_position(&self) -> Option<&str> {
        Some(self)
    }
}

impl ViewPositioned for &str {
    fn view_position(&self) -> Option<&str> {
        Some(self)
    }
}

pub fn is_frontal(view: &str) -> bool {
    matches!(view.trim().to_ascii_uppercase().as_str(), "AP" | "PA")
}

/// Indices of frontal (AP/PA) records, in input order.
pub fn frontal_indices<T: ViewPositioned>(records: &[T]) -> Vec<usize> {
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.view_position().is_some_and(is_frontal))
        .map(|(i, _)| i)
        .collect()
}

pub fn filter_frontal<T: ViewPositioned + Clone>(records: &[T]) -> Vec<T> {
    frontal_indices(records).into_iter().map(|i| records[i].clone()).collect()
}
