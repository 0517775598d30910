/// Folds a concept or property name into its lookup key: lowercase with
/// whitespace, `_` and `-` removed, so `"Backup facility"`, `BackupFacility`
/// and `backup_facility` all address the same thing.
pub(crate) fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
        .flat_map(char::to_lowercase)
        .collect()
}
