"""cmden test suite."""
