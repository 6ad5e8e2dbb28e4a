// identification
