// mdbook cannot link external crates when testing snippets, so every chapter
// is pulled in as a doc module and `cargo test --doc -p procnet-book` runs the
// code blocks against the real library.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/event-logs.md")]
pub mod event_logs {}
#[doc = include_str!("src/replay.md")]
pub mod replay {}
#[doc = include_str!("src/encoding.md")]
pub mod encoding {}
#[doc = include_str!("src/model.md")]
pub mod model {}
#[doc = include_str!("src/training.md")]
pub mod training {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
#[doc = include_str!("src/formats.md")]
pub mod formats {}
