# Domain records
