// Book chapters are included as doc comments later.
