"""File input and output"""
