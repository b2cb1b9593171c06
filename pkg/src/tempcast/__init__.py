"""Monthly city temperature forecasting with ARIMA/SARIMAX, an LSTM and a spiking network."""

__version__ = "0.1.0"
