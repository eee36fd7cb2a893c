"""Churn prediction: from-scratch learners, metrics and Shapley explanations."""
