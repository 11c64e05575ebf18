//! Holds the `acceptance` test target; the criteria live in `lacelab_cli::acceptance`.
