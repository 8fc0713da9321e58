pub mod consistency;
pub mod eoc;
pub mod manufactured;
pub mod rates;
