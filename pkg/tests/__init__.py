"""
FeatureBoost 测试套件。

各模块的单元测试，以及从 CSV 到报告的端到端流水线测试。
"""
