# Hardy toolkit package
