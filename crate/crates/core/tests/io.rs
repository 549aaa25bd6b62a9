//! AFLD records on disk.

use nsalpha_core::io::*;
use nsalpha_core::spectral::{random_band_field, FieldFlags};
use nsalpha_core::{Error, Grid, TimeSeries};

#[test]
fn fields_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.afld");
    let grid = Grid::cube(6, 2.0).unwrap();
    let f = random_band_field(&grid, 3, 2, 1)
        .unwrap()
        .with_flags(FieldFlags::MEAN_ZERO);
    save_field(&path, &f).unwrap();
    let back = load_field(&path).unwrap();
    assert_eq!(back.values(), f.values());
    assert_eq!(back.grid(), f.grid());
    assert_eq!(back.flags(), FieldFlags::MEAN_ZERO);
    let header = 4 + 4 + 4 + 4 + 3 * 4 + 3 * 8 + 4;
    assert_eq!(
        std::fs::metadata(&path).unwrap().len(),
        (header + 8 * 3 * 216) as u64
    );
}

#[test]
fn strided_series_keep_the_last_slice() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.afld");
    let grid = Grid::square(8, 1.0).unwrap();
    let slices: Vec<_> = (0..8)
        .map(|s| random_band_field(&grid, 1, 2, s).unwrap())
        .collect();
    let series = TimeSeries::new(0.0, 0.1, slices.clone()).unwrap();
    save_series(&path, &series, 3).unwrap();
    let records = load_records(&path).unwrap();
    assert_eq!(strided(8, 3), vec![0, 3, 6, 7]);
    assert_eq!(records.len(), 4);
    for (r, i) in records.iter().zip([0, 3, 6, 7]) {
        assert_eq!(r.values(), slices[i].values());
    }
}

#[test]
fn corrupt_files_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.afld");
    std::fs::write(&path, b"NOPE0000").unwrap();
    assert!(matches!(load_field(&path), Err(Error::Format(_))));
    std::fs::write(&path, b"").unwrap();
    assert!(matches!(load_field(&path), Err(Error::Format(_))));
    let grid = Grid::square(4, 1.0).unwrap();
    let mut bytes = Vec::new();
    write_field(&mut bytes, &random_band_field(&grid, 1, 1, 0).unwrap()).unwrap();
    bytes.truncate(bytes.len() - 5);
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_field(&path), Err(Error::Format(_))));
}
