"""Services package for business logic operations."""