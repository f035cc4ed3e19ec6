//! GeoJSON point collections for georeferenced water pixels.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointProperties {
    pub z: f64,
    pub u: f64,
    pub v: f64,
    pub area_m2: f64,
    pub wet: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    #[serde(rename = "type")]
    pub kind: String,
    pub coordinates: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    #[serde(rename = "type")]
    pub kind: String,
    pub geometry: Geometry,
    pub properties: PointProperties,
}

impl Feature {
    pub fn point(x: f64, y: f64, properties: PointProperties) -> Self {
        Self {
            kind: "Feature".into(),
            geometry: Geometry {
                kind: "Point".into(),
                coordinates: [x, y],
            },
            properties,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCollection {
    #[serde(rename = "type")]
    pub kind: String,
    /// Frame timestamp, seconds.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timestamp: Option<f64>,
    pub features: Vec<Feature>,
}

impl FeatureCollection {
    pub fn new(timestamp: Option<f64>, features: Vec<Feature>) -> Self {
        Self {
            kind: "FeatureCollection".into(),
            timestamp,
            features,
        }
    }

    /// Compact JSON with one feature per line.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\"type\":\"FeatureCollection\",");
        if let Some(ts) = self.timestamp {
            out.push_str(&format!("\"timestamp\":{},", serde_json::Value::from(ts)));
        }
        out.push_str("\"features\":[");
        for (i, f) in self.features.iter().enumerate() {
            out.push_str(if i == 0 { "\n" } else { ",\n" });
            out.push_str(&serde_json::to_string(f).expect("feature serializes"));
        }
        out.push_str("\n]}\n");
        out
    }
}
