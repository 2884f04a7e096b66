//! dB/linear conversions. Powers are carried in milliwatts throughout.

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

#[inline]
pub fn mw_to_dbm(mw: f64) -> f64 {
    linear_to_db(mw)
}

#[inline]
pub fn kmh_to_ms(kmh: f64) -> f64 {
    kmh / 3.6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert!((dbm_to_mw(20.0) - 100.0).abs() < 1e-12);
        assert!((dbm_to_mw(25.0) - 316.227_766_016_837_9).abs() < 1e-9);
        assert!((mw_to_dbm(100.0) - 20.0).abs() < 1e-12);
        assert!((db_to_linear(10.0) - 10.0).abs() < 1e-12);
        assert!((kmh_to_ms(140.0) - 38.888_888_888_888_886).abs() < 1e-12);
    }
}
