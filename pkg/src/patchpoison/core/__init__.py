"""Pure computation: patterns, poisoning, metrics, features and two-view geometry."""
