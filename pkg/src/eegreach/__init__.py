"""EEG reaching-movement decoding with a 3-D inception CNN."""
