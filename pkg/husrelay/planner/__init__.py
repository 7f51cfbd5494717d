# Battery schedule planners
