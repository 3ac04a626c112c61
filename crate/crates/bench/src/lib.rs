pub use bergman_core;
