"""Early-warning analysis of catastrophic bifurcations in financial time series."""
