"""Analysis routines: spectral detection, stationary series, separable fields"""
