"""Dynamic programming on fitted group context trees."""
