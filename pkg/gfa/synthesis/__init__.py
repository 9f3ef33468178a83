"""Synthetic scenario generation"""
