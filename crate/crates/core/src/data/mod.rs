//! Tabular ingestion, mixed-type encoding and vertical partitioning.

mod encoder;
mod schema;
mod split;

pub use encoder::{
    fit_encoder, fit_encoder_and_encode, mean_std, AttributeEncoding, ColumnEncoding,
    EncodedDataset, Encoder,
};
pub use schema::{
    leave_one_out, load_csv, Attribute, AttributeKind, Schema, TabularDataset, Value,
};
pub use split::{merge_parties, subsample_batch, vertical_split, VerticalSplit};

/// Schema of the red wine quality table: eleven continuous measurements and
/// the categorical quality grade 3 to 8.
pub fn red_wine_schema() -> Schema {
    let numeric = [
        "fixed_acidity",
        "volatile_acidity",
        "citric_acid",
        "residual_sugar",
        "chlorides",
        "free_sulfur_dioxide",
        "total_sulfur_dioxide",
        "density",
        "pH",
        "sulphates",
        "alcohol",
    ];
    let mut attrs: Vec<Attribute> = numeric.iter().map(|n| Attribute::continuous(n)).collect();
    attrs.push(Attribute::categorical(
        "quality",
        &["3", "4", "5", "6", "7", "8"],
    ));
    Schema::new(attrs, Some("quality")).expect("static schema is valid")
}
