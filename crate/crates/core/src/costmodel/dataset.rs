//! Published measurements used to calibrate the cycle model.
//!
//! Datasets are exchanged as CSV with a `param,metric,value` header. The
//! `param` column is a `;`-separated list of `name=integer` settings, e.g.
//! `kc=256;mr=32;nr=4`. Recognised metrics:
//!
//! | metric           | required params | meaning                                      |
//! |------------------|-----------------|----------------------------------------------|
//! | `pct_peak`       | `kc` or `mc`    | percent of peak of a kc- or mc-sweep point   |
//! | `macs_per_cycle` | `kc` or `mc`    | MACs per cycle of a kc- or mc-sweep point    |
//! | `ukr_cycles`     | `kc`            | cycles of one isolated micro-kernel call     |
//! | `mac_cycles`     | `kc`            | MAC-only cycles of one call (informational)  |
//! | `br_copy_cycles` | `kc`, `nr`      | cycles of one Br copy into local memory      |
//!
//! kc points default to `mr=16;nr=4`; mc points default to
//! `m=4096;n=4096;k=290` with `nc=n` and `kc=k`. Lines starting with `#` are
//! comments.

use std::collections::BTreeMap;
use std::io::Read;

use crate::matrix::ProblemDims;
use crate::{Error, Result};

/// The embedded measurements: kc and mc sweeps plus the scalar anchors.
///
/// The last mc point is drawn at x = 4098 in the published figure; the
/// experiment it reports ran with mc = m = 4096.
pub const PUBLISHED_DATASET_CSV: &str = "\
param,metric,value
kc=8,pct_peak,16.16161616
kc=16,pct_peak,27.5862069
kc=32,pct_peak,43.24324324
kc=64,pct_peak,60.37735849
kc=128,pct_peak,75.29411765
kc=290,pct_peak,87.60604027
kc=8,macs_per_cycle,5.171717172
kc=16,macs_per_cycle,8.827586207
kc=32,macs_per_cycle,13.83783784
kc=64,macs_per_cycle,19.32075472
kc=128,macs_per_cycle,24.09411765
kc=290,macs_per_cycle,28.03625378
mc=128,pct_peak,76.9296875
mc=256,pct_peak,81.96484375
mc=512,pct_peak,84.48242188
mc=1024,pct_peak,85.74121094
mc=2048,pct_peak,86.37060547
# plotted at x=4098
mc=4096,pct_peak,86.68530273
mc=128,macs_per_cycle,24.62
mc=256,macs_per_cycle,26.23
mc=512,macs_per_cycle,27.03
mc=1024,macs_per_cycle,27.44
mc=2048,macs_per_cycle,27.64
mc=4096,macs_per_cycle,27.74
kc=256;mr=16;nr=4,ukr_cycles,596
kc=64;mr=16;nr=4,ukr_cycles,212
kc=64;mr=16;nr=4,mac_cycles,150
kc=256;mr=32;nr=4,ukr_cycles,1429
kc=290;nr=4,br_copy_cycles,8309
";

/// One point of the isolated micro-kernel kc sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KcPoint {
    pub kc: usize,
    pub mr: usize,
    pub nr: usize,
    pub pct_peak: Option<f64>,
    pub macs_per_cycle: Option<f64>,
}

/// One point of the full-GEMM mc sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McPoint {
    pub mc: usize,
    pub dims: ProblemDims,
    pub nc: usize,
    pub kc: usize,
    pub pct_peak: Option<f64>,
    pub macs_per_cycle: Option<f64>,
}

/// A measured cycle count for one micro-kernel call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UkrAnchor {
    pub kc: usize,
    pub mr: usize,
    pub nr: usize,
    pub cycles: u64,
}

/// A measured cycle count for one Br copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CopyAnchor {
    pub kc: usize,
    pub nr: usize,
    pub cycles: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CalibrationDataset {
    pub kc_sweep: Vec<KcPoint>,
    pub mc_sweep: Vec<McPoint>,
    pub ukr_anchors: Vec<UkrAnchor>,
    /// `(kc, mac cycles)` for the 16×4 kernel. Not used by the fit.
    pub mac_cycle_anchors: Vec<(usize, u64)>,
    pub copy_anchors: Vec<CopyAnchor>,
}

impl CalibrationDataset {
    /// The embedded published dataset.
    pub fn published() -> Self {
        Self::from_csv_str(PUBLISHED_DATASET_CSV).expect("embedded dataset parses")
    }

    pub fn is_empty(&self) -> bool {
        self.kc_sweep.is_empty()
            && self.mc_sweep.is_empty()
            && self.ukr_anchors.is_empty()
            && self.mac_cycle_anchors.is_empty()
            && self.copy_anchors.is_empty()
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::from_csv_reader(text.as_bytes())
    }

    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(csv_error)?.clone();
        if headers.iter().collect::<Vec<_>>() != ["param", "metric", "value"] {
            return Err(Error::Format {
                offset: 0,
                message: format!("expected header `param,metric,value`, got {headers:?}"),
            });
        }
        let mut kc: BTreeMap<(usize, usize, usize), KcPoint> = BTreeMap::new();
        let mut mc: BTreeMap<(usize, usize, usize, usize, usize, usize), McPoint> = BTreeMap::new();
        let mut data = CalibrationDataset::default();
        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            let offset = record.position().map_or(0, |p| p.byte());
            let bad = |message: String| Error::Format { offset, message };
            if record.len() != 3 {
                return Err(bad(format!("expected 3 fields, got {}", record.len())));
            }
            let params = parse_params(&record[0]).map_err(bad)?;
            let metric = &record[1];
            let value: f64 = record[2]
                .parse()
                .map_err(|_| bad(format!("value {:?} is not a number", &record[2])))?;
            if !value.is_finite() || value < 0.0 {
                return Err(bad(format!("value {value} must be finite and non-negative")));
            }
            let get = |name: &str, default: Option<usize>| {
                params
                    .get(name)
                    .copied()
                    .or(default)
                    .ok_or_else(|| bad(format!("metric {metric} needs parameter `{name}`")))
            };
            let cycles = || {
                if value.fract() != 0.0 {
                    Err(bad(format!("cycle count {value} is not an integer")))
                } else {
                    Ok(value as u64)
                }
            };
            match metric {
                "pct_peak" | "macs_per_cycle" => {
                    let set = |pct: &mut Option<f64>, macs: &mut Option<f64>| {
                        if metric == "pct_peak" {
                            *pct = Some(value);
                        } else {
                            *macs = Some(value);
                        }
                    };
                    if params.contains_key("mc") {
                        let (m, n, k) = (get("m", Some(4096))?, get("n", Some(4096))?, get("k", Some(290))?);
                        let dims = ProblemDims::new(m, n, k).map_err(|e| bad(e.to_string()))?;
                        let point_mc = get("mc", None)?;
                        let nc = get("nc", Some(n))?;
                        let point_kc = get("kc", Some(k))?;
                        let p = mc.entry((point_mc, m, n, k, nc, point_kc)).or_insert(McPoint {
                            mc: point_mc,
                            dims,
                            nc,
                            kc: point_kc,
                            pct_peak: None,
                            macs_per_cycle: None,
                        });
                        set(&mut p.pct_peak, &mut p.macs_per_cycle);
                    } else {
                        let key = (get("kc", None)?, get("mr", Some(16))?, get("nr", Some(4))?);
                        let p = kc.entry(key).or_insert(KcPoint {
                            kc: key.0,
                            mr: key.1,
                            nr: key.2,
                            pct_peak: None,
                            macs_per_cycle: None,
                        });
                        set(&mut p.pct_peak, &mut p.macs_per_cycle);
                    }
                }
                "ukr_cycles" => data.ukr_anchors.push(UkrAnchor {
                    kc: get("kc", None)?,
                    mr: get("mr", Some(16))?,
                    nr: get("nr", Some(4))?,
                    cycles: cycles()?,
                }),
                "mac_cycles" => data.mac_cycle_anchors.push((get("kc", None)?, cycles()?)),
                "br_copy_cycles" => data.copy_anchors.push(CopyAnchor {
                    kc: get("kc", None)?,
                    nr: get("nr", None)?,
                    cycles: cycles()?,
                }),
                other => return Err(bad(format!("unknown metric {other:?}"))),
            }
        }
        data.kc_sweep = kc.into_values().collect();
        data.mc_sweep = mc.into_values().collect();
        Ok(data)
    }

    pub fn from_csv_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Published percent of peak for a kc-sweep value, if any.
    pub fn kc_reference(&self, kc: usize) -> Option<f64> {
        self.kc_sweep.iter().find(|p| p.kc == kc && p.mr == 16 && p.nr == 4)?.pct_peak
    }

    /// Published percent of peak for an mc-sweep value on `dims`, if any.
    pub fn mc_reference(&self, mc: usize, dims: &ProblemDims) -> Option<f64> {
        self.mc_sweep.iter().find(|p| p.mc == mc && p.dims == *dims)?.pct_peak
    }
}

fn csv_error(e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Format {
            offset,
            message: format!("{kind:?}"),
        },
    }
}

fn parse_params(field: &str) -> std::result::Result<BTreeMap<String, usize>, String> {
    let mut out = BTreeMap::new();
    for part in field.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("parameter {part:?} is not `name=integer`"))?;
        let v: usize = v
            .trim()
            .parse()
            .map_err(|_| format!("parameter {part:?} is not `name=integer`"))?;
        if v == 0 {
            return Err(format!("parameter {part:?} must be positive"));
        }
        out.insert(k.trim().to_string(), v);
    }
    if out.is_empty() {
        return Err("empty param field".into());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_dataset_shape() {
        let d = CalibrationDataset::published();
        assert_eq!(d.kc_sweep.len(), 6);
        assert_eq!(d.mc_sweep.len(), 6);
        assert!(d.kc_sweep.iter().all(|p| p.pct_peak.is_some() && p.macs_per_cycle.is_some()));
        assert_eq!(d.kc_sweep.iter().map(|p| p.kc).collect::<Vec<_>>(), [8, 16, 32, 64, 128, 290]);
        assert_eq!(d.mc_sweep.iter().map(|p| p.mc).collect::<Vec<_>>(), [128, 256, 512, 1024, 2048, 4096]);
        assert_eq!(d.ukr_anchors.len(), 3);
        assert_eq!(d.copy_anchors, vec![CopyAnchor { kc: 290, nr: 4, cycles: 8309 }]);
        assert_eq!(d.mac_cycle_anchors, vec![(64, 150)]);
        assert_eq!(d.kc_reference(290), Some(87.60604027));
        let dims = ProblemDims::new(4096, 4096, 290).unwrap();
        assert_eq!(d.mc_reference(4096, &dims), Some(86.68530273));
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(matches!(
            CalibrationDataset::from_csv_str("a,b,c\n"),
            Err(Error::Format { offset: 0, .. })
        ));
        for body in ["kc=8,bogus,1", "kc=x,pct_peak,1", "kc=8,pct_peak,abc", "nr=4,br_copy_cycles,5", "kc=8,ukr_cycles,5.5"] {
            let text = format!("param,metric,value\n{body}\n");
            match CalibrationDataset::from_csv_str(&text) {
                Err(Error::Format { offset, .. }) => assert_eq!(offset, 19, "{body}"),
                other => panic!("{body}: {other:?}"),
            }
        }
    }

    #[test]
    fn custom_mc_dims() {
        let d = CalibrationDataset::from_csv_str("param,metric,value\nmc=64;m=128;n=64;k=32,macs_per_cycle,20\n").unwrap();
        assert_eq!(d.mc_sweep[0].dims, ProblemDims::new(128, 64, 32).unwrap());
        assert_eq!((d.mc_sweep[0].nc, d.mc_sweep[0].kc), (64, 32));
    }
}
