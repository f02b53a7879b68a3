"""Functional Autoencoder Package - bases, models, baselines and evaluation"""
