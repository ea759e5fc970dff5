use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::domain::Grid;
use crate::error::{Error, Result};

/// One censored sample path: values on a sorted set of grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub support: Vec<usize>,
    pub values: Vec<f64>,
}

impl Fragment {
    pub fn new(support: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidInput("fragment with empty support".into()));
        }
        if support.len() != values.len() {
            return Err(Error::Shape(format!(
                "fragment has {} support nodes but {} values",
                support.len(),
                values.len()
            )));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "fragment support must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite fragment value".into()));
        }
        Ok(Fragment { support, values })
    }
}

/// Sample path fragments on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentSet {
    grid: Grid,
    curves: Vec<Fragment>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    curve_id: String,
    t: f64,
    value: f64,
}

impl FragmentSet {
    pub fn new(grid: Grid, curves: Vec<Fragment>) -> Result<Self> {
        let n = grid.n();
        if let Some(bad) = curves
            .iter()
            .flat_map(|c| c.support.iter())
            .find(|&&i| i >= n)
        {
            return Err(Error::Index {
                index: *bad,
                valid: format!("0..{n}"),
            });
        }
        Ok(FragmentSet { grid, curves })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn curves(&self) -> &[Fragment] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Reads `curve_id,t,value` rows; `t` is snapped to the grid. Curves
    /// keep the order in which their ids first appear.
    pub fn read_csv<R: Read>(grid: Grid, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut order: Vec<String> = Vec::new();
        let mut points: HashMap<String, Vec<(usize, f64)>> = HashMap::new();
        for (line, rec) in rdr.deserialize::<Row>().enumerate() {
            let row = rec.map_err(|e| Error::Parse(format!("fragment row {}: {e}", line + 2)))?;
            if !(0.0..=1.0).contains(&row.t) {
                return Err(Error::InvalidInput(format!(
                    "fragment row {}: t = {} outside [0, 1]",
                    line + 2,
                    row.t
                )));
            }
            let entry = points.entry(row.curve_id.clone()).or_insert_with(|| {
                order.push(row.curve_id.clone());
                Vec::new()
            });
            entry.push((grid.snap(row.t), row.value));
        }
        let mut curves = Vec::with_capacity(order.len());
        for id in order {
            let mut pts = points.remove(&id).expect("id recorded");
            pts.sort_by_key(|&(i, _)| i);
            if pts.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidInput(format!(
                    "curve {id} has two observations on the same grid node"
                )));
            }
            let (support, values) = pts.into_iter().unzip();
            curves.push(Fragment::new(support, values)?);
        }
        FragmentSet::new(grid, curves)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (c, curve) in self.curves.iter().enumerate() {
            for (&i, &v) in curve.support.iter().zip(&curve.values) {
                w.serialize(Row {
                    curve_id: c.to_string(),
                    t: self.grid.node(i),
                    value: v,
                })
                .map_err(|e| Error::Parse(e.to_string()))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
