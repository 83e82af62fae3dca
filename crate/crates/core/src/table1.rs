//! Reference station parameters used to drive the bundled synthetic dataset.
//!
//! Maximum likelihood estimates (μ, σ, ξ) for twenty Uruguayan stations,
//! 1981–2013 annual maxima of daily rainfall in mm. Only the parameters are
//! known; the series generated from them are surrogates.

use crate::gev::GevParams;

pub const STATIONS: [(&str, f64, f64, f64); 20] = [
    ("Punta del Este", 70.25, 22.30, -0.04),
    ("Aeropuerto Carrasco", 75.56, 21.36, 0.01),
    ("Mercedes", 78.13, 24.54, 0.17),
    ("Colonia", 80.41, 27.7, 0.15),
    ("Aeropuerto Melilla", 81.13, 28.52, -0.08),
    ("Rocha", 81.99, 18.81, 0.27),
    ("Prado", 82.32, 27.77, -0.19),
    ("Paso de los Toros", 84.66, 19.94, 0.10),
    ("Palmitas", 84.78, 29.16, -0.11),
    ("Melo", 86.49, 21.49, -0.12),
    ("Durazno", 86.78, 21.07, -0.05),
    ("Trinidad", 87.91, 29.05, -0.20),
    ("Paysandú", 88.04, 24.87, -0.08),
    ("Salto", 89.05, 25.16, 0.25),
    ("Rivera", 89.50, 19.76, 0.17),
    ("Young", 89.97, 24.60, -0.04),
    ("Treinta y tres", 90.92, 31.77, 0.09),
    ("Bella Unión", 97.67, 26.96, 0.03),
    ("Tacuarembó", 99.53, 30.22, -0.12),
    ("Artigas", 103.32, 39.96, -0.04),
];

/// Number of annual maxima per station in the reference record.
pub const YEARS: usize = 33;

pub fn station_params() -> Vec<(String, GevParams)> {
    STATIONS
        .iter()
        .map(|&(id, mu, sigma, xi)| (id.to_string(), GevParams { mu, sigma, xi }))
        .collect()
}
