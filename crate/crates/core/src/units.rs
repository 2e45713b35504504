//! dB/dBm/linear conversions. Everything downstream works in SI units
//! (watts, hertz, seconds); dB values exist only at the configuration
//! boundary.

/// Converts dBm to watts.
pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts watts to dBm.
pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Converts a dB ratio to linear scale.
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear ratio to dB.
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Noise power in watts over `bandwidth_hz` for a PSD given in dBm/Hz.
pub fn noise_power_w(noise_psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_w(noise_psd_dbm_hz + 10.0 * bandwidth_hz.log10())
}
